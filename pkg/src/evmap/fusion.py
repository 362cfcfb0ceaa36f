"""Reliability discounting and reduced Dempster combination of opinions.

The frame of discernment is the K singleton classes plus the unknown set.
Combination multiplies compatible masses and renormalizes away the pairwise
singleton conflict C = sum_{i != j} b1_i * b2_j; discounting scales the
singleton masses by a reliability weight in [0, 1] and moves the remainder
to vacuity.  Both operations preserve sum(b) + u = 1 up to float rounding;
a clamp-and-renormalize step keeps long fusion chains from drifting.

``combine_arrays`` and ``discount_arrays`` are the unvalidated hot-path
forms used by the mapping loop; the public wrappers validate and return
``BeliefAssignment`` values.
"""

from __future__ import annotations

import math
from functools import reduce
from typing import Sequence

import numpy as np

from evmap.evidence import BeliefAssignment

__all__ = [
    "TotalConflictError",
    "discount",
    "conflict",
    "combine",
    "fuse_sequence",
    "discount_arrays",
    "combine_arrays",
    "conflict_arrays",
]

# Conflict at or above this leaves no coherent mass to renormalize.
_CONFLICT_LIMIT = 1.0 - 1e-12
# Renormalize only when drift exceeds this; bounds error growth over
# thousands of sequential fusions per cell.
_RENORM_TRIGGER = 1e-12


class TotalConflictError(ValueError):
    """Both opinions are dogmatic and put all their mass on disjoint classes."""


def conflict_arrays(b1: np.ndarray, b2: np.ndarray) -> float:
    # sum_{i != j} b1_i b2_j == sum(b1) * sum(b2) - <b1, b2>
    return float(b1.sum() * b2.sum() - np.dot(b1, b2))


def discount_arrays(b: np.ndarray, u: float, w: float) -> tuple[np.ndarray, float]:
    """Unvalidated discount on raw (b, u): b' = w b, u' = 1 - w (1 - u).

    The vacuity update is evaluated as u + (1 - w)(1 - u), the same map
    rearranged so that w = 1 reproduces u and w = 0 yields exactly 1.
    """
    return w * b, u + (1.0 - w) * (1.0 - u)


def combine_arrays(
    b1: np.ndarray,
    u1: float,
    b2: np.ndarray,
    u2: float,
    clamp: bool = True,
) -> tuple[np.ndarray, float]:
    """Unvalidated reduced Dempster combination on raw (b, u) pairs.

    b_k = (b1_k b2_k + b1_k u2 + b2_k u1) / (1 - C), u = u1 u2 / (1 - C).
    With ``clamp`` the components are clipped to [0, 1] and renormalized if
    the total drifts more than 1e-12 from one.
    """
    c = conflict_arrays(b1, b2)
    if c >= _CONFLICT_LIMIT:
        raise TotalConflictError(
            f"conflict {c!r} leaves no coherent mass to combine"
        )
    denom = 1.0 - c
    b = (b1 * b2 + b1 * u2 + b2 * u1) / denom
    u = (u1 * u2) / denom
    if clamp:
        np.clip(b, 0.0, 1.0, out=b)
        u = min(max(u, 0.0), 1.0)
        total = float(b.sum()) + u
        if abs(total - 1.0) > _RENORM_TRIGGER:
            b /= total
            u /= total
    return b, u


def _check_same_frame(m1: BeliefAssignment, m2: BeliefAssignment) -> None:
    if m1.num_classes != m2.num_classes:
        raise ValueError(
            f"opinions disagree on the frame: {m1.num_classes} vs {m2.num_classes} classes"
        )


def discount(m: BeliefAssignment, w: float) -> BeliefAssignment:
    """Scale singleton beliefs by reliability w, moving the rest to vacuity.

    w = 1 is the identity; w = 0 yields the vacuous opinion.  This is the
    single extension point where a spatial weight enters the fused belief:
    swap it out to realize a different weight-to-opinion mapping.
    """
    wf = float(w)
    if not (math.isfinite(wf) and 0.0 <= wf <= 1.0):
        raise ValueError(f"reliability weight must be in [0, 1], got {w!r}")
    b, u = discount_arrays(m.b, m.u, wf)
    return BeliefAssignment(b=b, u=u)


def conflict(m1: BeliefAssignment, m2: BeliefAssignment) -> float:
    """Total mass the two opinions put on contradictory singleton pairs."""
    _check_same_frame(m1, m2)
    return min(1.0, max(0.0, conflict_arrays(m1.b, m2.b)))


def combine(m1: BeliefAssignment, m2: BeliefAssignment) -> BeliefAssignment:
    """Dempster-combine two opinions over the same frame.

    Raises TotalConflictError when the conflict reaches 1; in the mapping
    pipeline discounted sensor opinions always keep u > 0, so hitting that
    error indicates a bug upstream rather than a runtime condition.
    """
    _check_same_frame(m1, m2)
    b, u = combine_arrays(m1.b, m1.u, m2.b, m2.u)
    return BeliefAssignment(b=b, u=u)


def fuse_sequence(masses: Sequence[BeliefAssignment]) -> BeliefAssignment:
    """Left fold of ``combine`` over a non-empty sequence, in order."""
    if not masses:
        raise ValueError("need at least one opinion to fuse")
    return reduce(combine, masses)
