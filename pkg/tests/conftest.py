"""Shared strategies and helpers for the test suite."""

import numpy as np
from hypothesis import strategies as st

from evmap.evidence import (
    BeliefAssignment,
    ClassEvidence,
    dirichlet_to_belief,
    evidence_to_dirichlet,
)


def evidence_vectors(min_k=2, max_k=6, max_e=90.0):
    """Evidence lists of uniform length K in [min_k, max_k].

    Capping entries at 90 keeps the derived vacuity at or above 0.01 for
    every K, which the fusion properties rely on.
    """
    return st.integers(min_k, max_k).flatmap(
        lambda k: st.lists(
            st.floats(0.0, max_e, allow_nan=False, allow_infinity=False),
            min_size=k,
            max_size=k,
        )
    )


def masses(min_k=2, max_k=6, max_e=90.0):
    """Valid opinions derived from random evidence (u >= 0.01 by the cap)."""
    return evidence_vectors(min_k, max_k, max_e).map(
        lambda e: dirichlet_to_belief(evidence_to_dirichlet(ClassEvidence(e)))
    )


def mass_pairs(k=3, max_e=90.0):
    """Two opinions over the same K-class frame."""
    row = st.lists(
        st.floats(0.0, max_e, allow_nan=False, allow_infinity=False),
        min_size=k,
        max_size=k,
    )
    return st.tuples(row, row).map(
        lambda pair: tuple(
            dirichlet_to_belief(evidence_to_dirichlet(ClassEvidence(e))) for e in pair
        )
    )


def mass_triples(k=3, max_e=90.0):
    row = st.lists(
        st.floats(0.0, max_e, allow_nan=False, allow_infinity=False),
        min_size=k,
        max_size=k,
    )
    return st.tuples(row, row, row).map(
        lambda triple: tuple(
            dirichlet_to_belief(evidence_to_dirichlet(ClassEvidence(e))) for e in triple
        )
    )


def random_mass(rng: np.random.Generator, k: int, min_u: float = 0.0) -> BeliefAssignment:
    """One random opinion; u is uniform in [min_u, 1] and b fills the rest."""
    u = rng.uniform(min_u, 1.0)
    weights = rng.uniform(0.0, 1.0, size=k)
    total = weights.sum()
    if total == 0.0:
        weights[0] = 1.0
        total = 1.0
    b = (1.0 - u) * weights / total
    return BeliefAssignment(b=b, u=u)
