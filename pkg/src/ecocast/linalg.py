"""Regularized linear algebra shared by every learner in the package.

A single SVD backbone drives the exact, truncated, and ridge pseudo-inverses;
the three modes differ only in how singular values are filtered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EXACT_SVD",
    "InverseConfig",
    "SpectralEstimate",
    "finite_difference",
    "pseudo_inverse",
    "solve_ridge",
    "spectral_radius",
    "tikhonov",
    "truncated",
]

# Singular values below RANK_CUTOFF * sigma_max count as zero (numerical rank).
RANK_CUTOFF = 1e-12

_MODES = ("exact-svd", "truncated-svd", "tikhonov")


@dataclass(frozen=True)
class InverseConfig:
    """Pseudo-inverse policy.

    ``truncated-svd`` reads ``rank_or_threshold``: an integer keeps that many
    leading singular values, a real zeroes singular values below
    ``rank_or_threshold * sigma_max``.  ``tikhonov`` reads ``lam``, the ridge
    parameter; ``lam = 0`` behaves like ``exact-svd`` instead of failing on
    rank-deficient input.  Each mode reads only its own fields.
    """

    mode: str = "exact-svd"
    rank_or_threshold: int | float | None = None
    lam: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"unknown inverse mode {self.mode!r}; expected one of {_MODES}")
        if self.mode == "truncated-svd":
            t = self.rank_or_threshold
            if t is None or isinstance(t, bool):
                raise ValueError("truncated-svd requires rank_or_threshold")
            if isinstance(t, (int, np.integer)):
                if t < 1:
                    raise ValueError("truncation rank must be a positive integer")
            elif not (np.isfinite(t) and t >= 0.0):
                raise ValueError("truncation threshold must be a nonnegative real")
        elif self.mode == "tikhonov":
            if self.lam is None or not (np.isfinite(self.lam) and self.lam >= 0.0):
                raise ValueError("tikhonov requires lam >= 0")


EXACT_SVD = InverseConfig()


def tikhonov(lam: float) -> InverseConfig:
    """Ridge pseudo-inverse configuration with parameter ``lam``."""
    return InverseConfig(mode="tikhonov", lam=float(lam))


def truncated(rank_or_threshold: int | float) -> InverseConfig:
    """Truncated-SVD configuration (integer rank or relative threshold)."""
    return InverseConfig(mode="truncated-svd", rank_or_threshold=rank_or_threshold)


@dataclass(frozen=True)
class SpectralEstimate:
    """Spectral-radius estimate with iteration diagnostics."""

    radius: float
    iterations_used: int
    converged: bool

    def __post_init__(self) -> None:
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-d matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def pseudo_inverse(a, cfg: InverseConfig = EXACT_SVD) -> np.ndarray:
    """Regularized Moore-Penrose inverse of ``a``.

    ``exact-svd`` satisfies the four Penrose identities to numerical rank.
    ``tikhonov`` with ``lam > 0`` equals ``(a.T a + lam I)^-1 a.T`` through
    the singular-value filter ``s / (s^2 + lam)``.
    """
    a = _as_matrix(a, "a")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if cfg.mode == "tikhonov" and cfg.lam > 0.0:
        filt = s / (s * s + cfg.lam)
    else:
        keep = s > RANK_CUTOFF * s[0]
        if cfg.mode == "truncated-svd":
            t = cfg.rank_or_threshold
            if isinstance(t, (int, np.integer)):
                if t > min(a.shape):
                    raise ValueError("truncation rank exceeds min(rows, cols)")
                keep &= np.arange(s.size) < t
            else:
                keep &= s >= t * s[0]
        filt = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * filt) @ u.T


def solve_ridge(u, d, lam: float) -> np.ndarray:
    """Ridge solution of ``u @ coef = d`` with samples along the first axis.

    ``lam = 0`` on a full-column-rank design matrix reproduces the exact
    least-squares solution.
    """
    u = _as_matrix(u, "u")
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("d contains non-finite entries")
    if d.shape[0] != u.shape[0]:
        raise ValueError(
            f"sample dimension mismatch: {u.shape[0]} design rows vs {d.shape[0]} target rows"
        )
    if not lam >= 0.0:
        raise ValueError("lam must be >= 0")
    cfg = tikhonov(lam) if lam > 0.0 else EXACT_SVD
    return pseudo_inverse(u, cfg) @ d


def spectral_radius(m, tol: float = 1e-9, max_iter: int = 1000, seed: int = 0) -> SpectralEstimate:
    """Largest eigenvalue magnitude of a square matrix by power iteration.

    The radius is read off a small Krylov projection rebuilt from the current
    iterate each step, which keeps the estimate convergent when the dominant
    eigenvalues form a complex pair or are nearly tied in modulus.  Stopping
    is deflation-free, on radius change below ``tol``.
    """
    m = _as_matrix(m, "m")
    if m.shape[0] != m.shape[1]:
        raise ValueError("m must be square")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n = m.shape[0]
    depth = min(6, n)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    radius = -1.0
    for it in range(1, max_iter + 1):
        block = np.empty((n, depth + 1))
        block[:, 0] = x
        cols = depth + 1
        for j in range(depth):
            v = m @ block[:, j]
            nv = np.linalg.norm(v)
            if nv == 0.0:
                cols = j + 1
                break
            block[:, j + 1] = v / nv
        q, _ = np.linalg.qr(block[:, :cols])
        cand = float(np.max(np.abs(np.linalg.eigvals(q.T @ m @ q))))
        if radius >= 0.0 and abs(cand - radius) < tol:
            return SpectralEstimate(cand, it, True)
        radius = cand
        y = m @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # Iterate fell in the nullspace; the projected estimate is final.
            return SpectralEstimate(cand, it, True)
        x = y / ny
    return SpectralEstimate(max(radius, 0.0), max_iter, False)


def finite_difference(series, dt: float) -> np.ndarray:
    """Forward differences ``(x[i+1] - x[i]) / dt`` along the first axis."""
    s = np.asarray(series, dtype=float)
    if s.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    return np.diff(s, axis=0) / dt
