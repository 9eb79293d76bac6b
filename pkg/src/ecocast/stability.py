"""Rollout stability analysis.

A trained one-step predictor is iterated on its own output (context held
fixed) and scored against a held-out suffix of the observed series; the
reliability horizon is the first step whose normalized error exceeds the
unreliability threshold.  For single-brick linear models the spectral radius
of the series-to-series block is the matching analytic diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bricks import LinearBrick
from .datasets import TimeSeriesSet
from .linalg import SpectralEstimate, spectral_radius

__all__ = [
    "RolloutResult",
    "StabilityReport",
    "estimate_horizon",
    "linear_stability",
    "rollout",
    "split_train_validate",
]


@dataclass(frozen=True)
class RolloutResult:
    """Self-fed prediction run.

    ``predictions`` holds one column per completed step; ``errors`` (present
    when a reference was supplied) is the per-step RMSE across series, with
    length ``min(completed steps, reference length)``.  ``diverged`` is set
    when a prediction went non-finite (that step is dropped) or its magnitude
    exceeded the divergence bound (that step is kept); either way the run
    truncates there.
    """

    predictions: np.ndarray
    errors: np.ndarray | None
    diverged: bool
    steps_requested: int

    @property
    def steps_completed(self) -> int:
        return self.predictions.shape[1]


def rollout(
    model,
    start,
    context_values=(),
    steps: int = 1,
    reference=None,
    bound: float | None = None,
) -> RolloutResult:
    """Iterate the one-step predictor from ``start``, feeding each prediction
    back as the next input with the context held fixed.

    The default divergence bound is 1e6 times the model's largest absolute
    training value (falling back to the start vector's scale for hand-built
    models without training metadata).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(start, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValueError("start must be a finite 1-d series vector")
    if bound is None:
        base = getattr(model, "training_abs_max", None)
        if base is None or not base > 0.0:
            base = max(1.0, float(np.max(np.abs(x))))
        bound = 1e6 * float(base)
    preds = []
    diverged = False
    for _ in range(steps):
        y = model.predict_one_step(x, context_values)
        if not np.all(np.isfinite(y)):
            diverged = True
            break
        preds.append(y)
        if float(np.max(np.abs(y))) > bound:
            diverged = True
            break
        x = y
    predictions = np.array(preds).T if preds else np.empty((x.size, 0))
    errors = None
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        if ref.ndim != 2 or ref.shape[0] != predictions.shape[0]:
            raise ValueError("reference must be a series matrix with one row per series")
        span = min(predictions.shape[1], ref.shape[1])
        diff = predictions[:, :span] - ref[:, :span]
        errors = np.sqrt(np.mean(diff * diff, axis=0))
    return RolloutResult(
        predictions=predictions, errors=errors, diverged=diverged, steps_requested=steps
    )


def split_train_validate(ts: TimeSeriesSet, fraction: float) -> tuple[TimeSeriesSet, TimeSeriesSet]:
    """Consecutive (unshuffled) split; the leading ``fraction`` of the points
    is the training segment.  Both parts must keep at least 2 points."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n_train = int(round(ts.n_points * fraction))
    if n_train < 2 or ts.n_points - n_train < 2:
        raise ValueError(
            f"fraction {fraction} leaves a segment with fewer than 2 of {ts.n_points} points"
        )
    return ts.window(0, n_train), ts.window(n_train, ts.n_points)


@dataclass(frozen=True)
class StabilityReport:
    """Reliability-horizon report.

    ``horizon`` is the first rollout step whose normalized error exceeds
    ``epsilon`` (the validation length when none does).  ``spectral_radius``
    is present only for single-brick linear models.
    """

    horizon: int
    error_curve: np.ndarray
    epsilon: float
    spectral_radius: float | None = None

    def __post_init__(self) -> None:
        curve = np.array(self.error_curve, dtype=float)
        curve.setflags(write=False)
        object.__setattr__(self, "error_curve", curve)


def linear_stability(model, tol: float = 1e-9, max_iter: int = 1000) -> SpectralEstimate | None:
    """Spectral radius of the series-to-series block of a single-brick linear
    model; None for stacked or nonlinear models.

    Context columns are excluded.  Any scaling acts as a diagonal similarity
    on the series block, so the radius is the raw-unit iteration rate either
    way.
    """
    bricks = getattr(model, "bricks", None)
    if not bricks or len(bricks) != 1 or not isinstance(bricks[0], LinearBrick):
        return None
    ns = model.schema.n_series
    block = bricks[0].matrix[:, :ns]
    return spectral_radius(block, tol=tol, max_iter=max_iter)


def estimate_horizon(
    model,
    validation: TimeSeriesSet,
    context_values=(),
    epsilon: float = 0.2,
    start=None,
) -> StabilityReport:
    """Reliability horizon of the model on a held-out suffix.

    The model rolls out from the final training state (stored on the model,
    or passed explicitly via ``start``) across the validation window; the
    rollout never reads validation values, which enter only the error score.
    Each step is scored as the RMS over series of the error divided by that
    series' validation standard deviation, and the horizon is the first step
    whose score exceeds ``epsilon``.  ``epsilon = inf`` means "never", i.e.
    the full validation length.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if validation.n_points < 2:
        raise ValueError("validation needs at least 2 points")
    if start is None:
        start = getattr(model, "last_training_state", None)
        if start is None:
            raise ValueError("model records no final training state; pass start explicitly")
    ref = validation.values
    result = rollout(model, start, context_values, steps=validation.n_points, reference=ref)
    sigma = np.std(ref, axis=1)
    sigma[sigma <= 0.0] = 1.0
    span = result.predictions.shape[1]
    span = min(span, ref.shape[1])
    diff = (result.predictions[:, :span] - ref[:, :span]) / sigma[:, None]
    curve = np.sqrt(np.mean(diff * diff, axis=0))
    exceeded = np.nonzero(curve > epsilon)[0]
    if exceeded.size:
        horizon = int(exceeded[0]) + 1
    elif result.diverged:
        horizon = span
    else:
        horizon = validation.n_points
    estimate = linear_stability(model)
    return StabilityReport(
        horizon=horizon,
        error_curve=curve,
        epsilon=float(epsilon),
        spectral_radius=None if estimate is None else estimate.radius,
    )
