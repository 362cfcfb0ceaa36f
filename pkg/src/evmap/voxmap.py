"""Sparse voxel map of fused per-cell opinions and the scan integration loop.

Each world-frame point is converted to an opinion, spread to every cell
whose center lies within the kernel support, discounted by the normalized
kernel weight for that cell, and Dempster-combined into the cell.  An
absent cell is a vacuous opinion, so the first fusion into a fresh cell is
an identity combine and no priors are stored.

Integration is gather-then-apply: contributions are first grouped per cell
in global point order, then each cell is folded independently.  Cells may
be folded by any number of worker threads; because every cell's fold order
is the stored global order, the result is bit-identical for any thread
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from evmap.evidence import (
    BeliefAssignment,
    belief_masses_from_evidence,
    projected_probabilities,
    select_uncertainty,
)
from evmap.fusion import combine_arrays, discount_arrays
from evmap.kernel import KernelParams, neighbor_cells_and_distances, normalized_weight
from evmap.scan import ScanFrame

__all__ = [
    "MapConfig",
    "CellState",
    "IntegrationStats",
    "VoxelMap",
    "world_to_cell",
    "cell_center",
    "predict_label",
    "cell_uncertainty",
]

CellIndex = tuple[int, int, int]


@dataclass(frozen=True)
class MapConfig:
    """Mapping hyperparameters shared by the evidential map and the baseline."""

    num_classes: int
    voxel_size: float
    kernel: KernelParams
    max_range: float = 100.0
    min_weight: float = 1e-3

    def __post_init__(self) -> None:
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ValueError(f"num_classes must be an int >= 2, got {self.num_classes!r}")
        if not (math.isfinite(self.voxel_size) and self.voxel_size > 0.0):
            raise ValueError(f"voxel_size must be > 0, got {self.voxel_size!r}")
        if not (math.isfinite(self.max_range) and self.max_range > 0.0):
            raise ValueError(f"max_range must be > 0, got {self.max_range!r}")
        if not (math.isfinite(self.min_weight) and 0.0 <= self.min_weight < 1.0):
            raise ValueError(f"min_weight must be in [0, 1), got {self.min_weight!r}")


@dataclass
class CellState:
    """Fused opinion of one voxel plus bookkeeping counters."""

    mass: BeliefAssignment
    n_obs: int
    last_scan: int


@dataclass
class IntegrationStats:
    """Counts from one or more integrate calls."""

    points_kept: int = 0
    points_dropped_range: int = 0
    points_skipped_invalid: int = 0
    cells_created: int = 0
    cells_updated: int = 0

    def __add__(self, other: "IntegrationStats") -> "IntegrationStats":
        return IntegrationStats(
            points_kept=self.points_kept + other.points_kept,
            points_dropped_range=self.points_dropped_range + other.points_dropped_range,
            points_skipped_invalid=self.points_skipped_invalid + other.points_skipped_invalid,
            cells_created=self.cells_created + other.cells_created,
            cells_updated=self.cells_updated + other.cells_updated,
        )

    def summary(self) -> str:
        return (
            f"points kept={self.points_kept} dropped(range)={self.points_dropped_range} "
            f"skipped(invalid)={self.points_skipped_invalid} "
            f"cells created={self.cells_created} updated={self.cells_updated}"
        )


def world_to_cell(point, voxel_size: float) -> CellIndex:
    """Integer cell index by floor division of world coordinates."""
    p = np.asarray(point, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError("point must be finite")
    if not voxel_size > 0.0:
        raise ValueError(f"voxel_size must be > 0, got {voxel_size!r}")
    idx = np.floor(p / voxel_size)
    return (int(idx[0]), int(idx[1]), int(idx[2]))


def cell_center(index, voxel_size: float) -> np.ndarray:
    """World position of the cell center, (i + 0.5) * voxel_size per axis."""
    idx = np.asarray(index, dtype=np.float64).reshape(3)
    return (idx + 0.5) * voxel_size


def _gather_contributions(
    points: np.ndarray, config: MapConfig
) -> dict[CellIndex, list[tuple[int, float]]]:
    """Group (point row, kernel weight) pairs per target cell in point order."""
    contributions: dict[CellIndex, list[tuple[int, float]]] = {}
    vs = config.voxel_size
    support = config.kernel.length
    for i in range(points.shape[0]):
        idx, dist = neighbor_cells_and_distances(points[i], vs, support)
        weights = normalized_weight(dist, config.kernel)
        for j in range(idx.shape[0]):
            w = float(weights[j])
            if w >= config.min_weight:
                key = (int(idx[j, 0]), int(idx[j, 1]), int(idx[j, 2]))
                contributions.setdefault(key, []).append((i, w))
    return contributions


def _filter_scan(scan: ScanFrame, config: MapConfig) -> tuple[np.ndarray, IntegrationStats]:
    """Range/validity gating shared by both map types; returns the keep mask."""
    if scan.frame != "world":
        raise ValueError("integrate needs a world-frame scan; call transform_to_world first")
    if scan.num_classes != config.num_classes:
        raise ValueError(
            f"evidence has {scan.num_classes} classes, map expects {config.num_classes}"
        )
    finite = np.isfinite(scan.points).all(axis=1) & np.isfinite(scan.evidence).all(axis=1)
    origin = scan.pose[:3, 3]
    with np.errstate(invalid="ignore"):
        dist = np.linalg.norm(scan.points - origin, axis=1)
        keep = finite & (dist <= config.max_range)
    stats = IntegrationStats(
        points_kept=int(keep.sum()),
        points_dropped_range=int((finite & ~keep).sum()),
        points_skipped_invalid=int((~finite).sum()),
    )
    return keep, stats


def _run_partitioned(worker, keys: list, threads: int) -> list:
    """Apply ``worker`` to every key, optionally across a thread pool.

    Each key is owned by exactly one worker, and per-key work is order
    independent of the partitioning, so results do not depend on ``threads``.
    """
    if threads <= 1 or len(keys) < 2:
        return [worker(key) for key in keys]
    chunks = [keys[t::threads] for t in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        nested = list(pool.map(lambda chunk: [worker(key) for key in chunk], chunks))
    return [item for chunk in nested for item in chunk]


class VoxelMap:
    """Sparse integer-indexed store of fused cell opinions."""

    def __init__(self, config: MapConfig):
        self.config = config
        self.cells: dict[CellIndex, CellState] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def sorted_cells(self) -> list[tuple[CellIndex, CellState]]:
        """Cells in lexicographic index order; the export order."""
        return sorted(self.cells.items())

    def integrate_scan(self, scan: ScanFrame, threads: int = 1) -> IntegrationStats:
        """Fuse one world-frame scan into the map.

        Every in-range point contributes ``discount(opinion, w)`` to each
        cell within kernel support with weight w >= min_weight, combined in
        global point order.  Non-finite rows are skipped and counted.
        """
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        keep, stats = _filter_scan(scan, self.config)
        beliefs, vacuities = belief_masses_from_evidence(scan.evidence[keep])
        contributions = _gather_contributions(scan.points[keep], self.config)

        def fold(key: CellIndex):
            cell = self.cells.get(key)
            if cell is None:
                b = np.zeros(self.config.num_classes, dtype=np.float64)
                u = 1.0
                n = 0
            else:
                b = np.array(cell.mass.b, dtype=np.float64, copy=True)
                u = cell.mass.u
                n = cell.n_obs
            entries = contributions[key]
            for i, w in entries:
                db, du = discount_arrays(beliefs[i], vacuities[i], w)
                b, u = combine_arrays(b, u, db, du)
            return key, b, u, n + len(entries)

        results = _run_partitioned(fold, list(contributions), threads)
        for key, b, u, n_obs in results:
            if key in self.cells:
                stats.cells_updated += 1
            else:
                stats.cells_created += 1
            self.cells[key] = CellState(
                mass=BeliefAssignment(b=b, u=u), n_obs=n_obs, last_scan=scan.seq
            )
        return stats


def predict_label(cell: CellState, num_classes: int) -> int:
    """Class with the highest expected probability; ties go to the lowest index."""
    if cell.mass.num_classes != num_classes:
        raise ValueError(
            f"cell has {cell.mass.num_classes} classes, expected {num_classes}"
        )
    return int(np.argmax(projected_probabilities(cell.mass)))


def cell_uncertainty(cell: CellState, num_classes: int, measure: str = "vacuity") -> float:
    """Named uncertainty of the cell opinion: vacuity, variance, or entropy."""
    return select_uncertainty(cell.mass, num_classes, measure)
