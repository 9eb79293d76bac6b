"""Shallow one-layer learners ("bricks").

Five brick kinds share one recipe: map the input through a fixed feature
stage, then solve the output weights in closed form with a regularized
pseudo-inverse.

* linear        - no feature stage, the predictor is a single matrix
* dsn           - random (optionally gradient-refined) hidden layer plus
                  activation
* kernel        - Gaussian-kernel ridge in dual form, with per-dataset
                  distance scales
* tensor        - two hidden layers combined through a flattened outer
                  product per sample
* kernel-tensor - dual-form product of two Gaussian kernels (the kernel
                  analogue of the tensor brick)

Trained bricks are immutable; training is deterministic given the seed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import EXACT_SVD, InverseConfig, pseudo_inverse

__all__ = [
    "Activation",
    "Brick",
    "DSNBrick",
    "KernelBrick",
    "KernelSpec",
    "KernelTensorBrick",
    "LinearBrick",
    "TensorBrick",
    "activate",
    "activation_derivative",
    "apply_brick",
    "gaussian_kernel",
    "kernel_matrix",
    "train_dsn_brick",
    "train_kernel_brick",
    "train_kt_brick",
    "train_linear_brick",
    "train_tensor_brick",
    "uniform_kernel_spec",
]


class Activation(enum.Enum):
    """Elementwise nonlinearity for hidden layers.

    ``step`` maps negatives to 0 and everything else to 1 (so step(0) = 1,
    the indicator of x >= 0); ``identity`` is the no-op that reduces a DSN
    brick to the plain linear predictor.
    """

    STEP = "step"
    SIGMOID = "sigmoid"
    RELU = "relu"
    IDENTITY = "identity"


def activate(a: Activation, x) -> np.ndarray:
    """Apply the activation elementwise."""
    x = np.asarray(x, dtype=float)
    if a is Activation.STEP:
        return (x >= 0.0).astype(float)
    if a is Activation.SIGMOID:
        # exp of a nonpositive argument only, so large |x| cannot overflow
        z = np.exp(-np.abs(x))
        return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    if a is Activation.RELU:
        return np.maximum(x, 0.0)
    return np.array(x, dtype=float)


def activation_derivative(a: Activation, x) -> np.ndarray:
    """Elementwise derivative at ``x`` (zero almost everywhere for step)."""
    x = np.asarray(x, dtype=float)
    if a is Activation.SIGMOID:
        s = activate(a, x)
        return s * (1.0 - s)
    if a is Activation.RELU:
        return (x > 0.0).astype(float)
    if a is Activation.IDENTITY:
        return np.ones_like(x)
    return np.zeros_like(x)


@dataclass(frozen=True)
class KernelSpec:
    """Per-dataset scale factors for the Gaussian kernel distance.

    ``slices`` partitions the input vector into contiguous dataset segments;
    segment d is divided by ``scales[d]`` before squared distances are
    accumulated, so the kernel is
    ``exp(-sum_d ||(x_d - z_d) / scales[d]||^2)``.  An infinite scale switches
    its segment off, which in the all-infinite limit turns the kernel into
    the constant-one kernel.
    """

    scales: tuple[float, ...]
    slices: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        scales = tuple(float(s) for s in self.scales)
        slices = tuple((int(a), int(b)) for a, b in self.slices)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "slices", slices)
        if not slices:
            raise ValueError("at least one slice is required")
        if len(scales) != len(slices):
            raise ValueError("one scale per slice is required")
        pos = 0
        for a, b in slices:
            if a != pos or b <= a:
                raise ValueError("slices must contiguously partition the input vector")
            pos = b
        for s in scales:
            if not s > 0.0:
                raise ValueError("all scales must be positive")

    @property
    def dim(self) -> int:
        return self.slices[-1][1]

    def scale(self, x) -> np.ndarray:
        """Divide each dataset segment by its scale (rows are the vector axis)."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"input dimension {x.shape[0]} != kernel spec dimension {self.dim}")
        out = np.empty_like(x)
        for (a, b), s in zip(self.slices, self.scales):
            out[a:b] = 0.0 if math.isinf(s) else x[a:b] / s
        return out


def uniform_kernel_spec(dim: int, scale: float = 1.0) -> KernelSpec:
    """Single-dataset spec covering a ``dim``-long vector with one scale."""
    return KernelSpec(scales=(scale,), slices=((0, dim),))


def gaussian_kernel(x, z, spec: KernelSpec) -> float:
    """Gaussian kernel value for two vectors under per-dataset scaling."""
    dx = spec.scale(x) - spec.scale(z)
    return float(np.exp(-np.dot(dx, dx)))


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    """Gram/cross matrix ``K[i, j] = k(a[:, i], b[:, j])`` for column samples."""
    sa = spec.scale(np.asarray(a, dtype=float))
    sb = spec.scale(np.asarray(b, dtype=float))
    if sa.ndim != 2 or sb.ndim != 2:
        raise ValueError("kernel_matrix expects 2-d column-sample matrices")
    d2 = (
        np.sum(sa * sa, axis=0)[:, None]
        + np.sum(sb * sb, axis=0)[None, :]
        - 2.0 * (sa.T @ sb)
    )
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2)


def _freeze(a) -> np.ndarray:
    # C order normalizes the memory layout so BLAS rounding cannot depend on
    # whether an array arrived as a transposed view or a reloaded copy
    a = np.array(a, dtype=float, order="C")
    a.setflags(write=False)
    return a


def _check_vector_or_columns(x, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    cols = x[:, None] if single else x
    if cols.ndim != 2 or cols.shape[0] != dim:
        raise ValueError(f"{what}: expected input dimension {dim}, got shape {x.shape}")
    return cols, single


@dataclass(frozen=True)
class LinearBrick:
    """One-step predictor ``y = matrix @ x``."""

    matrix: np.ndarray
    kind: str = field(default="linear", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-d")

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[0]

    def apply_columns(self, x) -> np.ndarray:
        cols, _ = _check_vector_or_columns(x, self.input_dim, "linear brick")
        return self.matrix @ cols

    def apply(self, x) -> np.ndarray:
        cols, single = _check_vector_or_columns(x, self.input_dim, "linear brick")
        out = self.matrix @ cols
        return out[:, 0] if single else out


@dataclass(frozen=True)
class DSNBrick:
    """Random-hidden-layer brick ``y = output_weights @ act(hidden_weights @ x)``."""

    hidden_weights: np.ndarray
    output_weights: np.ndarray
    activation: Activation
    refine_converged: bool | None = None
    refine_trace: tuple[float, ...] | None = None
    kind: str = field(default="dsn", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_weights", _freeze(self.hidden_weights))
        object.__setattr__(self, "output_weights", _freeze(self.output_weights))
        if self.hidden_weights.ndim != 2 or self.output_weights.ndim != 2:
            raise ValueError("weights must be 2-d")
        if self.output_weights.shape[1] != self.hidden_weights.shape[0]:
            raise ValueError("output weights do not match the hidden layer size")

    @property
    def input_dim(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.output_weights.shape[0]

    def apply(self, x) -> np.ndarray:
        cols, single = _check_vector_or_columns(x, self.input_dim, "dsn brick")
        out = self.output_weights @ activate(self.activation, self.hidden_weights @ cols)
        return out[:, 0] if single else out

    def apply_columns(self, x) -> np.ndarray:
        cols, _ = _check_vector_or_columns(x, self.input_dim, "dsn brick")
        return self.output_weights @ activate(self.activation, self.hidden_weights @ cols)


@dataclass(frozen=True)
class KernelBrick:
    """Dual-form Gaussian-kernel ridge brick.

    Retains exactly the training inputs seen at fit time; prediction is
    ``dual_coefficients @ k(training_inputs, x)``.
    """

    training_inputs: np.ndarray
    dual_coefficients: np.ndarray
    spec: KernelSpec
    ridge: float
    kind: str = field(default="kernel", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "training_inputs", _freeze(self.training_inputs))
        object.__setattr__(self, "dual_coefficients", _freeze(self.dual_coefficients))
        if self.training_inputs.ndim != 2 or self.dual_coefficients.ndim != 2:
            raise ValueError("training inputs and dual coefficients must be 2-d")
        if self.dual_coefficients.shape[1] != self.training_inputs.shape[1]:
            raise ValueError("one dual coefficient column per retained training input required")
        if self.training_inputs.shape[0] != self.spec.dim:
            raise ValueError("kernel spec does not match the training input dimension")
        if not self.ridge >= 0.0:
            raise ValueError("ridge must be >= 0")

    @property
    def input_dim(self) -> int:
        return self.training_inputs.shape[0]

    @property
    def output_dim(self) -> int:
        return self.dual_coefficients.shape[0]

    def apply(self, x) -> np.ndarray:
        cols, single = _check_vector_or_columns(x, self.input_dim, "kernel brick")
        out = self.dual_coefficients @ kernel_matrix(self.spec, self.training_inputs, cols)
        return out[:, 0] if single else out

    def apply_columns(self, x) -> np.ndarray:
        cols, _ = _check_vector_or_columns(x, self.input_dim, "kernel brick")
        return self.dual_coefficients @ kernel_matrix(self.spec, self.training_inputs, cols)


@dataclass(frozen=True)
class TensorBrick:
    """Split-hidden-layer brick over flattened outer-product features.

    Per sample the feature vector is ``act(w_a @ x) (outer) act(w_b @ x)``
    flattened row-major to length ``h_a * h_b``.
    """

    hidden_weights_a: np.ndarray
    hidden_weights_b: np.ndarray
    output_weights: np.ndarray
    activation: Activation
    kind: str = field(default="tensor", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_weights_a", _freeze(self.hidden_weights_a))
        object.__setattr__(self, "hidden_weights_b", _freeze(self.hidden_weights_b))
        object.__setattr__(self, "output_weights", _freeze(self.output_weights))
        ha, hb = self.hidden_weights_a.shape[0], self.hidden_weights_b.shape[0]
        if self.hidden_weights_a.shape[1] != self.hidden_weights_b.shape[1]:
            raise ValueError("both hidden layers must share the input dimension")
        if self.output_weights.shape[1] != ha * hb:
            raise ValueError("output weights do not match the tensor feature length")

    @property
    def input_dim(self) -> int:
        return self.hidden_weights_a.shape[1]

    @property
    def output_dim(self) -> int:
        return self.output_weights.shape[0]

    def _features(self, cols: np.ndarray) -> np.ndarray:
        ha = activate(self.activation, self.hidden_weights_a @ cols)
        hb = activate(self.activation, self.hidden_weights_b @ cols)
        n = cols.shape[1]
        return (ha[:, None, :] * hb[None, :, :]).reshape(ha.shape[0] * hb.shape[0], n)

    def apply(self, x) -> np.ndarray:
        cols, single = _check_vector_or_columns(x, self.input_dim, "tensor brick")
        out = self.output_weights @ self._features(cols)
        return out[:, 0] if single else out

    def apply_columns(self, x) -> np.ndarray:
        cols, _ = _check_vector_or_columns(x, self.input_dim, "tensor brick")
        return self.output_weights @ self._features(cols)


@dataclass(frozen=True)
class KernelTensorBrick:
    """Dual-form brick over the product of two Gaussian kernels.

    The tensor product of two feature maps induces the elementwise product
    of their kernels, so the Gram matrix is ``K_a * K_b`` and prediction is
    ``dual_coefficients @ (k_a(U, x) * k_b(U, x))``.
    """

    training_inputs: np.ndarray
    dual_coefficients: np.ndarray
    spec_a: KernelSpec
    spec_b: KernelSpec
    ridge: float
    kind: str = field(default="kernel-tensor", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "training_inputs", _freeze(self.training_inputs))
        object.__setattr__(self, "dual_coefficients", _freeze(self.dual_coefficients))
        if self.training_inputs.ndim != 2 or self.dual_coefficients.ndim != 2:
            raise ValueError("training inputs and dual coefficients must be 2-d")
        if self.dual_coefficients.shape[1] != self.training_inputs.shape[1]:
            raise ValueError("one dual coefficient column per retained training input required")
        if self.spec_a.dim != self.training_inputs.shape[0] or self.spec_b.dim != self.spec_a.dim:
            raise ValueError("kernel specs do not match the training input dimension")
        if not self.ridge >= 0.0:
            raise ValueError("ridge must be >= 0")

    @property
    def input_dim(self) -> int:
        return self.training_inputs.shape[0]

    @property
    def output_dim(self) -> int:
        return self.dual_coefficients.shape[0]

    def _cross(self, cols: np.ndarray) -> np.ndarray:
        return kernel_matrix(self.spec_a, self.training_inputs, cols) * kernel_matrix(
            self.spec_b, self.training_inputs, cols
        )

    def apply(self, x) -> np.ndarray:
        cols, single = _check_vector_or_columns(x, self.input_dim, "kernel-tensor brick")
        out = self.dual_coefficients @ self._cross(cols)
        return out[:, 0] if single else out

    def apply_columns(self, x) -> np.ndarray:
        cols, _ = _check_vector_or_columns(x, self.input_dim, "kernel-tensor brick")
        return self.dual_coefficients @ self._cross(cols)


Brick = LinearBrick | DSNBrick | KernelBrick | TensorBrick | KernelTensorBrick


def apply_brick(brick: Brick, x) -> np.ndarray:
    """Apply any brick to a vector (or column matrix) of inputs."""
    return brick.apply(x)


def _as_pairs(inputs, targets) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(inputs, dtype=float)
    v = np.asarray(targets, dtype=float)
    if u.ndim != 2 or v.ndim != 2:
        raise ValueError("inputs and targets must be 2-d with one sample per column")
    if u.shape[1] != v.shape[1]:
        raise ValueError(f"sample count mismatch: {u.shape[1]} inputs vs {v.shape[1]} targets")
    if u.shape[1] == 0:
        raise ValueError("at least one training column is required")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("training data contains non-finite values")
    return u, v


def train_linear_brick(inputs, targets, cfg: InverseConfig = EXACT_SVD) -> LinearBrick:
    """Closed-form linear predictor ``targets @ pinv(inputs)``.

    Among all linear maps this minimizes the Frobenius training residual
    (with the configured regularization applied to the inverse).
    """
    u, v = _as_pairs(inputs, targets)
    return LinearBrick(matrix=v @ pseudo_inverse(u, cfg))


def _init_weights(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # scaled uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
    bound = 1.0 / math.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def _output_solve_loss(
    w: np.ndarray, u: np.ndarray, v: np.ndarray, a: Activation, cfg: InverseConfig
) -> tuple[np.ndarray, np.ndarray, float]:
    """Closed-form output weights for hidden weights ``w`` plus the refined
    objective value (data residual plus the ridge term when cfg carries one)."""
    h = activate(a, w @ u)
    out = v @ pseudo_inverse(h, cfg)
    resid = out @ h - v
    lam = cfg.lam if (cfg.mode == "tikhonov" and cfg.lam) else 0.0
    loss = float(np.sum(resid * resid) + lam * np.sum(out * out))
    return out, h, loss


def _refine_hidden_weights(
    w: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    a: Activation,
    cfg: InverseConfig,
    max_steps: int,
    rel_tol: float,
) -> tuple[np.ndarray, tuple[float, ...], bool]:
    """Gradient descent on the reduced objective Q(w) with the output weights
    re-solved in closed form each step.

    Because the output weights minimize the same objective, the gradient of
    Q equals the partial gradient through the hidden layer with the output
    weights held fixed (envelope argument).  Backtracking line search accepts
    only improvements, so the returned w is the best seen.
    """
    out, h, loss = _output_solve_loss(w, u, v, a, cfg)
    trace = [loss]
    step = 1.0
    converged = False
    for _ in range(max_steps):
        z = w @ u
        grad = 2.0 * ((out.T @ (out @ h - v)) * activation_derivative(a, z)) @ u.T
        gnorm2 = float(np.sum(grad * grad))
        if gnorm2 == 0.0:
            converged = True
            break
        accepted = False
        while step > 1e-16:
            w_new = w - step * grad
            out_new, h_new, loss_new = _output_solve_loss(w_new, u, v, a, cfg)
            if loss_new <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = loss - loss_new
        w, out, h, loss = w_new, out_new, h_new, loss_new
        trace.append(loss)
        step *= 2.0
        if improvement < rel_tol * max(abs(loss), 1e-300):
            converged = True
            break
    return w, tuple(trace), converged


def train_dsn_brick(
    inputs,
    targets,
    hidden_size: int,
    activation: Activation = Activation.SIGMOID,
    mode: str = "fixed-random",
    cfg: InverseConfig = EXACT_SVD,
    seed: int = 0,
    hidden_weights=None,
    max_refine_steps: int = 200,
    refine_tol: float = 1e-8,
) -> DSNBrick:
    """Train a DSN brick: seeded random hidden layer, closed-form output solve.

    ``mode = "gradient-refined"`` additionally improves the hidden weights by
    backtracking gradient descent on the training objective; refinement that
    stalls before the tolerance is reported through ``refine_converged`` with
    the best weights so far retained.  ``hidden_weights`` overrides the random
    initialization.
    """
    u, v = _as_pairs(inputs, targets)
    if hidden_size < 1:
        raise ValueError("hidden_size must be >= 1")
    if mode not in ("fixed-random", "gradient-refined"):
        raise ValueError(f"unknown dsn training mode {mode!r}")
    if hidden_weights is None:
        w = _init_weights(np.random.default_rng(seed), hidden_size, u.shape[0])
    else:
        w = np.array(hidden_weights, dtype=float)
        if w.shape != (hidden_size, u.shape[0]):
            raise ValueError("hidden_weights must have shape (hidden_size, input_dim)")
    refine_trace: tuple[float, ...] | None = None
    refine_converged: bool | None = None
    if mode == "gradient-refined":
        w, refine_trace, refine_converged = _refine_hidden_weights(
            w, u, v, activation, cfg, max_refine_steps, refine_tol
        )
    out, _, _ = _output_solve_loss(w, u, v, activation, cfg)
    return DSNBrick(
        hidden_weights=w,
        output_weights=out,
        activation=activation,
        refine_converged=refine_converged,
        refine_trace=refine_trace,
    )


def dsn_objective_gradient(brick_or_weights, inputs, targets, activation=None, cfg=EXACT_SVD):
    """Analytic gradient of the refined DSN objective at the given hidden
    weights (output weights re-solved in closed form).  Exposed for gradient
    checking against finite differences."""
    if isinstance(brick_or_weights, DSNBrick):
        w = np.asarray(brick_or_weights.hidden_weights, dtype=float)
        activation = brick_or_weights.activation
    else:
        w = np.asarray(brick_or_weights, dtype=float)
        if activation is None:
            raise ValueError("activation is required when passing raw weights")
    u, v = _as_pairs(inputs, targets)
    out, h, _ = _output_solve_loss(w, u, v, activation, cfg)
    return 2.0 * ((out.T @ (out @ h - v)) * activation_derivative(activation, w @ u)) @ u.T


def dsn_objective(weights, inputs, targets, activation: Activation, cfg: InverseConfig = EXACT_SVD) -> float:
    """Refined DSN objective Q(w) with output weights re-solved in closed form."""
    u, v = _as_pairs(inputs, targets)
    w = np.asarray(weights, dtype=float)
    return _output_solve_loss(w, u, v, activation, cfg)[2]


def _solve_dual(gram: np.ndarray, targets: np.ndarray, lam: float) -> np.ndarray:
    if lam > 0.0:
        return np.linalg.solve(gram + lam * np.eye(gram.shape[0]), targets.T).T
    # ridge-free fit: exact interpolation when the Gram matrix allows it,
    # minimum-norm pseudo-inverse solution otherwise
    return targets @ pseudo_inverse(gram, EXACT_SVD)


def train_kernel_brick(inputs, targets, spec: KernelSpec, lam: float) -> KernelBrick:
    """Kernel ridge in dual form: coefficients ``targets @ (K + lam I)^-1``."""
    u, v = _as_pairs(inputs, targets)
    if spec.dim != u.shape[0]:
        raise ValueError("kernel spec does not match the input dimension")
    if not lam >= 0.0:
        raise ValueError("lam must be >= 0")
    gram = kernel_matrix(spec, u, u)
    dual = _solve_dual(gram, v, float(lam))
    return KernelBrick(training_inputs=u, dual_coefficients=dual, spec=spec, ridge=float(lam))


def train_kt_brick(
    inputs, targets, spec_a: KernelSpec, spec_b: KernelSpec, lam: float
) -> KernelTensorBrick:
    """Kernel-tensor brick: dual-form ridge on the product kernel ``K_a * K_b``."""
    u, v = _as_pairs(inputs, targets)
    if spec_a.dim != u.shape[0] or spec_b.dim != u.shape[0]:
        raise ValueError("kernel specs do not match the input dimension")
    if not lam >= 0.0:
        raise ValueError("lam must be >= 0")
    gram = kernel_matrix(spec_a, u, u) * kernel_matrix(spec_b, u, u)
    dual = _solve_dual(gram, v, float(lam))
    return KernelTensorBrick(
        training_inputs=u,
        dual_coefficients=dual,
        spec_a=spec_a,
        spec_b=spec_b,
        ridge=float(lam),
    )


def train_tensor_brick(
    inputs,
    targets,
    hidden_size_a: int,
    hidden_size_b: int,
    activation: Activation = Activation.SIGMOID,
    cfg: InverseConfig = EXACT_SVD,
    seed: int = 0,
    hidden_weights_a=None,
    hidden_weights_b=None,
) -> TensorBrick:
    """Train a tensor brick on flattened outer-product features.

    Both hidden layers are drawn from the seeded generator (a first, then b);
    explicit weights override the random initialization.
    """
    u, v = _as_pairs(inputs, targets)
    if hidden_size_a < 1 or hidden_size_b < 1:
        raise ValueError("hidden sizes must be >= 1")
    rng = np.random.default_rng(seed)
    wa = _init_weights(rng, hidden_size_a, u.shape[0]) if hidden_weights_a is None else np.array(hidden_weights_a, dtype=float)
    wb = _init_weights(rng, hidden_size_b, u.shape[0]) if hidden_weights_b is None else np.array(hidden_weights_b, dtype=float)
    if wa.shape != (hidden_size_a, u.shape[0]) or wb.shape != (hidden_size_b, u.shape[0]):
        raise ValueError("hidden weights must have shape (hidden_size, input_dim)")
    ha = activate(activation, wa @ u)
    hb = activate(activation, wb @ u)
    feats = (ha[:, None, :] * hb[None, :, :]).reshape(hidden_size_a * hidden_size_b, u.shape[1])
    out = v @ pseudo_inverse(feats, cfg)
    return TensorBrick(
        hidden_weights_a=wa, hidden_weights_b=wb, output_weights=out, activation=activation
    )
