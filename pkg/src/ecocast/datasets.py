"""Data model for the forecasting pipeline: named time series with a uniform
cadence, static context maps ("almost-constant parameters"), training-pair
construction, default adimensionalization, the pointwise soil-loss map
product, and the derivative-free scale search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scaling import ScalingSet, adimensionalize, undo_adimensionalize
from .stack import BrickConfig, InputSchema, train_stack

__all__ = [
    "ContextMap",
    "ScalingSearchResult",
    "ScalingSet",
    "TimeSeriesSet",
    "adimensionalize",
    "build_training_pairs",
    "default_scaling",
    "flatten_context",
    "optimize_scaling",
    "scaling_from_columns",
    "undo_adimensionalize",
    "usle_soil_loss",
]

_UNIFORM_RTOL = 1e-9


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesSet:
    """Named series sharing one uniformly sampled time axis.

    ``values`` has shape (n_series, n_points); ``epoch`` records the calendar
    date of time zero when the set was ingested from dated files.  Missing
    values are resolved at ingestion, so all values are finite here.
    """

    names: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray
    units: tuple[str, ...] = ()
    epoch: str | None = None

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        times = _readonly(self.times)
        values = _readonly(self.values)
        if not names:
            raise ValueError("at least one series is required")
        if len(set(names)) != len(names):
            raise ValueError("series names must be unique")
        for n in names:
            if not n or "," in n or "\n" in n or "\r" in n:
                raise ValueError(f"invalid series name {n!r}")
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-d array")
        if not np.all(np.isfinite(times)):
            raise ValueError("times must be finite")
        if values.shape != (len(names), times.size):
            raise ValueError(
                f"values must have shape (n_series, n_points) = ({len(names)}, {times.size})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite (resolve missing values at ingestion)")
        if times.size >= 2:
            steps = np.diff(times)
            dt = steps[0]
            if dt <= 0.0 or np.any(np.abs(steps - dt) > _UNIFORM_RTOL * abs(dt)):
                raise ValueError("times must be strictly increasing with uniform cadence")
        units = tuple(self.units) if self.units else ("",) * len(names)
        if len(units) != len(names):
            raise ValueError("one unit string per series is required")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "units", units)

    @property
    def n_series(self) -> int:
        return len(self.names)

    @property
    def n_points(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        if self.n_points < 2:
            raise ValueError("dt is undefined for a single time point")
        return float(self.times[1] - self.times[0])

    def series(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]

    def state(self, i: int) -> np.ndarray:
        return np.array(self.values[:, i])

    def window(self, start: int, stop: int) -> "TimeSeriesSet":
        """Consecutive sub-range [start, stop) with the same names and units."""
        if not 0 <= start < stop <= self.n_points:
            raise ValueError(f"invalid window [{start}, {stop}) for {self.n_points} points")
        return TimeSeriesSet(
            names=self.names,
            times=self.times[start:stop],
            values=self.values[:, start:stop],
            units=self.units,
            epoch=self.epoch,
        )


@dataclass(frozen=True)
class ContextMap:
    """Static 2-d raster; row 0 is the northernmost row.

    Cells equal to ``nodata_value`` are missing; they must be resolved (by an
    ingestion fill policy) before the map can feed brick inputs.
    """

    name: str
    values: np.ndarray
    cell_size: float = 1.0
    x_origin: float = 0.0
    y_origin: float = 0.0
    nodata_value: float | None = None

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("map values must be a nonempty 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("map values must be finite")
        if not self.cell_size > 0.0:
            raise ValueError("cell_size must be positive")
        if not self.name:
            raise ValueError("maps must be named")
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def pixel_count(self) -> int:
        return self.values.size

    def nodata_mask(self) -> np.ndarray:
        if self.nodata_value is None:
            return np.zeros(self.values.shape, dtype=bool)
        return self.values == self.nodata_value

    def has_nodata(self) -> bool:
        return bool(self.nodata_mask().any())

    def grid_signature(self) -> tuple:
        return (self.n_rows, self.n_cols, self.cell_size, self.x_origin, self.y_origin)


def flatten_context(maps) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Row-major concatenation of map pixels, one slice per map."""
    parts = []
    slices = []
    pos = 0
    for m in maps:
        if m.has_nodata():
            raise ValueError(f"map {m.name!r} has unresolved nodata cells")
        flat = m.values.ravel()
        parts.append(flat)
        slices.append((pos, pos + flat.size))
        pos += flat.size
    vector = np.concatenate(parts) if parts else np.empty(0)
    return vector, tuple(slices)


def build_training_pairs(
    ts: TimeSeriesSet, maps=()
) -> tuple[np.ndarray, np.ndarray, InputSchema]:
    """Supervised one-step pairs: column j is ``(T(t_j), context)`` with
    target ``T(t_{j+1})``; N time points give N - 1 pairs."""
    if ts.n_points < 2:
        raise ValueError("at least 2 time points are required to form pairs")
    maps = tuple(maps)
    context, _ = flatten_context(maps)
    n_pairs = ts.n_points - 1
    series_part = ts.values[:, :-1]
    if context.size:
        inputs = np.vstack([series_part, np.repeat(context[:, None], n_pairs, axis=1)])
    else:
        inputs = np.array(series_part)
    targets = np.array(ts.values[:, 1:])
    schema = InputSchema(
        series_names=ts.names,
        context_names=tuple(m.name for m in maps),
        context_sizes=tuple(m.pixel_count for m in maps),
    )
    return inputs, targets, schema


def default_scaling(ts: TimeSeriesSet, maps=()) -> ScalingSet:
    """Unit-variance initialization: offset = mean and scale = standard
    deviation per dataset, with scale 1 for constant datasets."""
    offsets = []
    scales = []
    for row in ts.values:
        offsets.append(float(np.mean(row)))
        sd = float(np.std(row))
        scales.append(sd if sd > 0.0 else 1.0)
    for m in maps:
        if m.has_nodata():
            raise ValueError(f"map {m.name!r} has unresolved nodata cells")
        offsets.append(float(np.mean(m.values)))
        sd = float(np.std(m.values))
        scales.append(sd if sd > 0.0 else 1.0)
    return ScalingSet(offsets=np.array(offsets), scales=np.array(scales))


def scaling_from_columns(inputs, schema: InputSchema) -> ScalingSet:
    """Unit-variance initialization measured on first-brick input columns."""
    u = np.asarray(inputs, dtype=float)
    slices, owners = schema.dataset_slices(1)
    offsets = np.zeros(schema.n_datasets)
    scales = np.ones(schema.n_datasets)
    for (a, b), d in zip(slices, owners):
        seg = u[a:b]
        offsets[d] = float(np.mean(seg))
        sd = float(np.std(seg))
        scales[d] = sd if sd > 0.0 else 1.0
    return ScalingSet(offsets=offsets, scales=scales)


def usle_soil_loss(
    rainfall: ContextMap,
    erodibility: ContextMap,
    slope: ContextMap,
    cover: ContextMap,
    practice: ContextMap,
    name: str = "soil-loss",
) -> ContextMap:
    """Pointwise product of the five factor maps; nodata propagates."""
    maps = (rainfall, erodibility, slope, cover, practice)
    base = maps[0]
    for m in maps[1:]:
        if m.grid_signature() != base.grid_signature():
            raise ValueError(
                f"factor map {m.name!r} grid does not match {base.name!r}"
            )
    mask = np.zeros(base.values.shape, dtype=bool)
    for m in maps:
        mask |= m.nodata_mask()
    product = maps[0].values * maps[1].values * maps[2].values * maps[3].values * maps[4].values
    nodata = next((m.nodata_value for m in maps if m.nodata_value is not None), None)
    if mask.any():
        product = np.array(product)
        product[mask] = nodata
    return ContextMap(
        name=name,
        values=product,
        cell_size=base.cell_size,
        x_origin=base.x_origin,
        y_origin=base.y_origin,
        nodata_value=nodata,
    )


@dataclass(frozen=True)
class ScalingSearchResult:
    """Outcome of the coordinate-descent scale search."""

    scaling: ScalingSet
    ridges: tuple[float, ...]
    loss_trace: tuple[float, ...]
    evaluations: int


def optimize_scaling(
    inputs,
    targets,
    schema: InputSchema,
    configs,
    grid,
    split_fraction: float = 0.8,
    n_bricks: int | None = None,
    seed: int = 0,
    initial: ScalingSet | None = None,
    max_passes: int = 20,
) -> ScalingSearchResult:
    """Coordinate descent over per-dataset scales and per-brick ridges.

    Pairs are split consecutively; every candidate retrains the stack on the
    leading split and scores one-step RMSE on the trailing split (per-series,
    normalized by the training-segment standard deviation so candidates are
    comparable).  Each coordinate sweeps the multiplicative ``grid``; only
    strict improvements are accepted and passes repeat until a full sweep
    accepts nothing.  The loss trace starts at the initial configuration and
    is non-increasing by construction.
    """
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("the candidate grid must not be empty")
    if any(not g > 0.0 for g in grid):
        raise ValueError("grid multipliers must be positive")
    u = np.asarray(inputs, dtype=float)
    v = np.asarray(targets, dtype=float)
    if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
        raise ValueError("inputs and targets must be column-sample matrices of equal width")
    n = u.shape[1]
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    n_train = int(round(n * split_fraction))
    if n_train < 1 or n - n_train < 1:
        raise ValueError("the split leaves an empty training or validation part")
    u_train, u_val = u[:, :n_train], u[:, n_train:]
    v_train, v_val = v[:, :n_train], v[:, n_train:]

    if isinstance(configs, BrickConfig):
        if n_bricks is None:
            raise ValueError("n_bricks is required when a single config is given")
        config_list = [configs] * n_bricks
    else:
        config_list = list(configs)
        n_bricks = len(config_list)

    scaling = initial if initial is not None else scaling_from_columns(u_train, schema)
    ridges = [c.ridge for c in config_list]

    ns = schema.n_series
    norm = np.std(v_train, axis=1)
    norm[norm <= 0.0] = 1.0

    context = u[ns:, 0] if u.shape[0] > ns else np.empty(0)
    evaluations = 0

    def evaluate(cand_scaling: ScalingSet, cand_ridges) -> float:
        nonlocal evaluations
        evaluations += 1
        cfgs = [replace(c, ridge=r) for c, r in zip(config_list, cand_ridges)]
        model = train_stack(
            u_train, v_train, schema, cfgs, n_bricks=n_bricks, seed=seed, scaling=cand_scaling
        )
        pred = model.predict_columns(u_val[:ns], context)
        err = (pred - v_val) / norm[:, None]
        return float(np.sqrt(np.mean(err * err)))

    best = evaluate(scaling, ridges)
    trace = [best]
    for _ in range(max_passes):
        improved = False
        for d in range(schema.n_datasets):
            current = float(scaling.scales[d])
            for g in grid:
                cand = current * g
                if cand == current:
                    continue
                cand_scaling = scaling.with_scale(d, cand)
                loss = evaluate(cand_scaling, ridges)
                if loss < best:
                    best, scaling = loss, cand_scaling
                    trace.append(best)
                    improved = True
        for k in range(n_bricks):
            current = ridges[k]
            for g in grid:
                cand = current * g
                if cand == current:
                    continue
                cand_ridges = list(ridges)
                cand_ridges[k] = cand
                loss = evaluate(scaling, cand_ridges)
                if loss < best:
                    best, ridges = loss, cand_ridges
                    trace.append(best)
                    improved = True
        if not improved:
            break
    return ScalingSearchResult(
        scaling=scaling,
        ridges=tuple(ridges),
        loss_trace=tuple(trace),
        evaluations=evaluations,
    )
