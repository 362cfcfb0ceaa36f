"""Kernel-weighted Dirichlet count baseline map.

Each cell accumulates ``alpha += k(d) * p_hat`` for every nearby point,
where p_hat is the point's expected class probability vector (a soft
label) and k the sparse kernel.  Labels are argmax alpha; cell uncertainty
is the Dirichlet-posterior variance of the winning class.  That variance
shrinks as counts grow no matter how contradictory the counts are, which
is exactly the failure mode the evidential map is compared against.

Cells start from a small uniform prior and updates are purely additive, so
integrating scans one by one equals integrating their concatenation bit
for bit under a fixed point order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from evmap.evidence import (
    BeliefAssignment,
    dirichlet_variance,
    expected_probabilities_from_evidence,
)
from evmap.scan import ScanFrame
from evmap.voxmap import (
    CellIndex,
    IntegrationStats,
    MapConfig,
    _filter_scan,
    _gather_contributions,
    _run_partitioned,
)

__all__ = [
    "SbkiCellState",
    "SbkiMap",
    "sbki_predict_label",
    "sbki_uncertainty",
    "sbki_cell_measure",
    "cell_opinion",
    "DEFAULT_PRIOR",
]

DEFAULT_PRIOR = 1e-3


@dataclass
class SbkiCellState:
    """Accumulated kernel-weighted soft counts for one voxel."""

    alpha: np.ndarray
    n_obs: int
    last_scan: int


class SbkiMap:
    """Sparse voxel map of Dirichlet concentration counts."""

    def __init__(self, config: MapConfig, prior: float = DEFAULT_PRIOR):
        if not (math.isfinite(prior) and prior > 0.0):
            raise ValueError(f"prior must be finite and > 0, got {prior!r}")
        self.config = config
        self.prior = float(prior)
        self.cells: dict[CellIndex, SbkiCellState] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def sorted_cells(self) -> list[tuple[CellIndex, SbkiCellState]]:
        return sorted(self.cells.items())

    def integrate_scan(self, scan: ScanFrame, threads: int = 1) -> IntegrationStats:
        """Add kernel-weighted soft labels of one world-frame scan.

        Shares the neighborhood, min_weight, and ordering rules of the
        evidential map so both methods consume identical contributions.
        """
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        keep, stats = _filter_scan(scan, self.config)
        soft_labels = expected_probabilities_from_evidence(scan.evidence[keep])
        contributions = _gather_contributions(scan.points[keep], self.config)
        sigma0 = self.config.kernel.sigma0

        def fold(key: CellIndex):
            cell = self.cells.get(key)
            if cell is None:
                alpha = np.full(self.config.num_classes, self.prior, dtype=np.float64)
                n = 0
            else:
                alpha = np.array(cell.alpha, dtype=np.float64, copy=True)
                n = cell.n_obs
            entries = contributions[key]
            for i, w in entries:
                alpha += (sigma0 * w) * soft_labels[i]
            return key, alpha, n + len(entries)

        results = _run_partitioned(fold, list(contributions), threads)
        for key, alpha, n_obs in results:
            if key in self.cells:
                stats.cells_updated += 1
            else:
                stats.cells_created += 1
            alpha.setflags(write=False)
            self.cells[key] = SbkiCellState(alpha=alpha, n_obs=n_obs, last_scan=scan.seq)
        return stats


def sbki_predict_label(cell: SbkiCellState) -> int:
    """Argmax concentration; ties go to the lowest class index."""
    return int(np.argmax(cell.alpha))


def sbki_uncertainty(cell: SbkiCellState) -> float:
    """Dirichlet-posterior variance of the winning class under the cell counts."""
    return dirichlet_variance(cell.alpha, sbki_predict_label(cell))


def cell_opinion(cell: SbkiCellState, prior: float) -> BeliefAssignment:
    """Opinion view of a count cell via its accumulated evidence e = alpha - prior.

    Used to write baseline cells into the shared map file schema; the
    winning class is unchanged because the prior is uniform.
    """
    e = np.maximum(cell.alpha - prior, 0.0)
    k = e.size
    s = float(e.sum()) + k
    return BeliefAssignment(b=e / s, u=k / s)


def sbki_cell_measure(cell: SbkiCellState, prior: float, measure: str) -> float:
    """Named uncertainty computed from the cell's native concentrations."""
    if measure == "variance":
        return sbki_uncertainty(cell)
    if measure == "vacuity":
        e_total = float(np.maximum(cell.alpha - prior, 0.0).sum())
        k = cell.alpha.size
        return k / (e_total + k)
    if measure == "entropy":
        p = np.asarray(cell.alpha / cell.alpha.sum())
        pos = p[p > 0.0]
        return float(-np.sum(pos * np.log(pos))) / math.log(cell.alpha.size)
    raise ValueError(
        f"unknown uncertainty measure {measure!r}; expected vacuity, variance, or entropy"
    )
