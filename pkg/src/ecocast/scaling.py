"""Per-dataset adimensionalization.

Every input dataset (each named series, each context map) carries an offset
and a positive scale factor; transforming ``(x - offset) / scale`` per
dataset makes all brick inputs dimensionless, and the same factors double as
the Gaussian-kernel distance scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ScalingSet", "adimensionalize", "undo_adimensionalize"]


@dataclass(frozen=True)
class ScalingSet:
    """One ``(offset, scale)`` pair per dataset, in schema order
    (series first, then context maps)."""

    offsets: np.ndarray
    scales: np.ndarray

    def __post_init__(self) -> None:
        offsets = np.array(self.offsets, dtype=float, order="C")
        scales = np.array(self.scales, dtype=float, order="C")
        offsets.setflags(write=False)
        scales.setflags(write=False)
        if offsets.ndim != 1 or scales.shape != offsets.shape:
            raise ValueError("offsets and scales must be 1-d arrays of equal length")
        if not np.all(np.isfinite(offsets)):
            raise ValueError("offsets must be finite")
        if not np.all(np.isfinite(scales) & (scales > 0.0)):
            raise ValueError("all scale factors must be positive and finite")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "scales", scales)

    @property
    def n_datasets(self) -> int:
        return self.offsets.size

    def with_scale(self, dataset_index: int, scale: float) -> "ScalingSet":
        scales = np.array(self.scales)
        scales[dataset_index] = scale
        return ScalingSet(offsets=self.offsets, scales=scales)


def _apply(x, scaling: ScalingSet, schema, brick_index: int, forward: bool) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    slices, dataset_of = schema.dataset_slices(brick_index)
    dim = slices[-1][1] if slices else 0
    if x.shape[0] != dim:
        raise ValueError(f"expected input dimension {dim} for brick {brick_index}, got {x.shape[0]}")
    out = np.empty_like(x)
    for (a, b), d in zip(slices, dataset_of):
        if forward:
            out[a:b] = (x[a:b] - scaling.offsets[d]) / scaling.scales[d]
        else:
            out[a:b] = x[a:b] * scaling.scales[d] + scaling.offsets[d]
    return out


def adimensionalize(x, scaling: ScalingSet, schema, brick_index: int = 1) -> np.ndarray:
    """Per-dataset ``(x_d - offset_d) / scale_d`` over a brick input layout.

    Accepts a vector or a column-sample matrix; ``brick_index >= 2`` layouts
    scale the trailing previous-output segment with the series factors.
    """
    if scaling.n_datasets != schema.n_datasets:
        raise ValueError("scaling set does not match the schema's dataset count")
    return _apply(x, scaling, schema, brick_index, forward=True)


def undo_adimensionalize(x, scaling: ScalingSet, schema, brick_index: int = 1) -> np.ndarray:
    """Inverse of :func:`adimensionalize` given the same factors."""
    if scaling.n_datasets != schema.n_datasets:
        raise ValueError("scaling set does not match the schema's dataset count")
    return _apply(x, scaling, schema, brick_index, forward=False)
