"""Sparse spatial kernel and voxel-neighborhood enumeration.

The kernel is the compact-support cosine taper used by kernel-inference
occupancy mappers: it equals sigma0 at distance zero, decreases
monotonically, and is exactly zero at and beyond the support radius, so a
measurement only ever touches a small finite set of cells.  Distances are
measured from the point to cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelParams",
    "sparse_kernel",
    "normalized_weight",
    "neighbor_cells",
    "neighbor_cells_and_distances",
]


@dataclass(frozen=True)
class KernelParams:
    """Kernel scale sigma0 (unitless) and support radius length (meters)."""

    sigma0: float
    length: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0.0):
            raise ValueError(f"sigma0 must be finite and > 0, got {self.sigma0!r}")
        if not (math.isfinite(self.length) and self.length > 0.0):
            raise ValueError(f"length must be finite and > 0, got {self.length!r}")


def _unit_kernel(r: np.ndarray) -> np.ndarray:
    # r = d / length in [0, 1]; evaluates to 1 at r=0 and 0 at r=1.
    c = 2.0 * np.pi * r
    return (2.0 + np.cos(c)) * (1.0 - r) / 3.0 + np.sin(c) / (2.0 * np.pi)


def normalized_weight(d, params: KernelParams):
    """Kernel weight rescaled to w(0) = 1 and w(d >= length) = 0.

    Accepts a scalar or an array of distances; negative or non-finite
    distances are rejected.
    """
    arr = np.asarray(d, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("distance must be finite")
    if np.any(arr < 0.0):
        raise ValueError("distance must be non-negative")
    r = arr / params.length
    w = np.where(r < 1.0, _unit_kernel(np.minimum(r, 1.0)), 0.0)
    if arr.ndim == 0:
        return float(w)
    return w


def sparse_kernel(d, params: KernelParams):
    """Taper value sigma0 * [(2 + cos(2 pi d/l)) (1 - d/l) / 3 + sin(2 pi d/l) / (2 pi)]
    for d < l, and exactly 0 for d >= l.
    """
    return params.sigma0 * normalized_weight(d, params)


def neighbor_cells_and_distances(
    point, voxel_size: float, length: float
) -> tuple[np.ndarray, np.ndarray]:
    """Cells whose centers lie within ``length`` of ``point`` (inclusive).

    Returns (indices, distances) with indices as an (M, 3) int64 array in
    lexicographic (x, y, z) order and distances to the matching centers.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError("point must be finite")
    if not voxel_size > 0.0:
        raise ValueError(f"voxel_size must be > 0, got {voxel_size!r}")
    if not length > 0.0:
        raise ValueError(f"length must be > 0, got {length!r}")
    # Centers sit at (i + 0.5) * voxel_size, so the candidate index range per
    # axis is [ceil((p - l)/v - 0.5), floor((p + l)/v - 0.5)].
    lo = np.ceil((p - length) / voxel_size - 0.5).astype(np.int64)
    hi = np.floor((p + length) / voxel_size - 0.5).astype(np.int64)
    axes = [np.arange(lo[i], hi[i] + 1, dtype=np.int64) for i in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if grid.shape[0] == 0:
        return grid, np.zeros(0, dtype=np.float64)
    centers = (grid + 0.5) * voxel_size
    d2 = np.sum((centers - p) ** 2, axis=1)
    keep = d2 <= length * length
    return grid[keep], np.sqrt(d2[keep])


def neighbor_cells(point, voxel_size: float, length: float) -> list[tuple[int, int, int]]:
    """Index triples of ``neighbor_cells_and_distances`` as plain tuples."""
    idx, _ = neighbor_cells_and_distances(point, voxel_size, length)
    return [(int(a), int(b), int(c)) for a, b, c in idx]
