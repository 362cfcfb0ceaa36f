"""Evidence vectors, Dirichlet concentrations, and subjective-logic opinions.

A length-K non-negative evidence vector e parameterizes a Dirichlet
distribution with concentration alpha = e + 1 and strength S = sum(alpha).
The equivalent opinion puts belief mass b_k = e_k / S on class k and
vacuity u = K / S on the unknown set, so sum(b) + u = 1 by construction
(Josang-style multinomial opinions with a uniform prior weight of one per
class).  Vacuity is the primary per-cell uncertainty; the winning-class
Dirichlet variance and normalized expected entropy are computed alongside.

Everything here is a pure function over float64 values and is safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClassEvidence",
    "DirichletParams",
    "BeliefAssignment",
    "UncertaintyMeasures",
    "SingularOpinionError",
    "evidence_to_dirichlet",
    "dirichlet_to_belief",
    "belief_to_dirichlet",
    "expected_probabilities",
    "projected_probabilities",
    "dirichlet_variance",
    "uncertainty_measures",
    "select_uncertainty",
    "pseudo_evidence_from_probs",
    "belief_masses_from_evidence",
    "expected_probabilities_from_evidence",
    "vacuous_mass",
]

# Opinions must sum to one within this tolerance; individual components may
# carry up to _COMPONENT_TOL of float dust before being clipped to [0, 1].
_SUM_TOL = 1e-9
_COMPONENT_TOL = 1e-12

UNCERTAINTY_MEASURES = ("vacuity", "variance", "entropy")


class SingularOpinionError(ValueError):
    """Opinion has zero vacuity, so its Dirichlet strength is infinite."""


def _vector(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ClassEvidence:
    """Non-negative per-class evidence counts over K >= 2 classes."""

    e: np.ndarray

    def __post_init__(self) -> None:
        e = _vector(self.e, "evidence")
        if e.size < 2:
            raise ValueError(f"need at least 2 classes, got {e.size}")
        if not np.all(np.isfinite(e)):
            raise ValueError("evidence must be finite")
        if np.any(e < 0.0):
            raise ValueError("evidence must be non-negative")
        e.setflags(write=False)
        object.__setattr__(self, "e", e)

    @property
    def num_classes(self) -> int:
        return self.e.size


@dataclass(frozen=True, eq=False)
class DirichletParams:
    """Dirichlet concentration vector; every entry is >= 1."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = _vector(self.alpha, "alpha")
        if a.size < 2:
            raise ValueError(f"need at least 2 classes, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha must be finite")
        if np.any(a < 1.0):
            raise ValueError("alpha entries must be >= 1")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def strength(self) -> float:
        return float(self.alpha.sum())

    @property
    def num_classes(self) -> int:
        return self.alpha.size


@dataclass(frozen=True, eq=False)
class BeliefAssignment:
    """Singleton beliefs b plus vacuity u with sum(b) + u = 1.

    Fresh sensor opinions always have u > 0; u may reach 0 only through
    long fusion chains, and such dogmatic opinions cannot be inverted back
    to a Dirichlet.
    """

    b: np.ndarray
    u: float

    def __post_init__(self) -> None:
        b = _vector(self.b, "belief")
        if b.size < 2:
            raise ValueError(f"need at least 2 classes, got {b.size}")
        u = float(self.u)
        if not (np.all(np.isfinite(b)) and math.isfinite(u)):
            raise ValueError("belief mass must be finite")
        if (
            np.any(b < -_COMPONENT_TOL)
            or np.any(b > 1.0 + _COMPONENT_TOL)
            or u < -_COMPONENT_TOL
            or u > 1.0 + _COMPONENT_TOL
        ):
            raise ValueError("belief components must lie in [0, 1]")
        total = float(b.sum()) + u
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"belief mass must sum to 1, got {total!r}")
        np.clip(b, 0.0, 1.0, out=b)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "u", min(max(u, 0.0), 1.0))

    @property
    def num_classes(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class UncertaintyMeasures:
    """Scalar uncertainty summaries of one opinion.

    vacuity is mass on the unknown set, in [0, 1].  dirichlet_variance is
    the posterior variance of the winning class marginal, in [0, 0.25].
    expected_entropy_norm is the entropy of the expected class probabilities
    divided by ln K, in [0, 1].
    """

    vacuity: float
    dirichlet_variance: float
    expected_entropy_norm: float


def vacuous_mass(num_classes: int) -> BeliefAssignment:
    """The neutral opinion: no singleton belief, all mass on the unknown set."""
    return BeliefAssignment(b=np.zeros(num_classes), u=1.0)


def evidence_to_dirichlet(ev: ClassEvidence) -> DirichletParams:
    """Concentration of the evidence-induced Dirichlet: alpha = e + 1."""
    return DirichletParams(alpha=ev.e + 1.0)


def dirichlet_to_belief(params: DirichletParams) -> BeliefAssignment:
    """Opinion of a Dirichlet: b_k = (alpha_k - 1) / S, u = K / S."""
    s = params.strength
    return BeliefAssignment(b=(params.alpha - 1.0) / s, u=params.num_classes / s)


def belief_to_dirichlet(m: BeliefAssignment, num_classes: int) -> DirichletParams:
    """Invert ``dirichlet_to_belief``: S = K / u, alpha_k = b_k * S + 1.

    Raises SingularOpinionError when u = 0 (infinite strength).
    """
    if num_classes != m.num_classes:
        raise ValueError(
            f"opinion has {m.num_classes} classes, expected {num_classes}"
        )
    if m.u <= 0.0:
        raise SingularOpinionError("cannot invert an opinion with zero vacuity")
    s = num_classes / m.u
    return DirichletParams(alpha=m.b * s + 1.0)


def expected_probabilities(params: DirichletParams) -> np.ndarray:
    """Dirichlet mean, p_k = alpha_k / S; sums to 1."""
    return np.asarray(params.alpha / params.strength)


def projected_probabilities(m: BeliefAssignment) -> np.ndarray:
    """Expected class probabilities of an opinion: p_k = b_k + u / K.

    Identical to ``expected_probabilities(belief_to_dirichlet(m, K))`` for
    u > 0 and remains well defined in the dogmatic limit u = 0.
    """
    return np.asarray(m.b + m.u / m.num_classes)


def dirichlet_variance(alpha, k: int) -> float:
    """Marginal variance of class k: alpha_k (S - alpha_k) / (S^2 (S + 1)).

    Evaluated as p (1 - p) / (S + 1) with p = alpha_k / S, the same
    expression rearranged to stay finite for very large strengths.  Accepts
    DirichletParams or a raw positive concentration vector (count-style
    cells may legitimately hold entries below 1).
    """
    if isinstance(alpha, DirichletParams):
        a = alpha.alpha
    else:
        a = _vector(alpha, "alpha")
        if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
            raise ValueError("concentrations must be positive and finite")
    k = int(k)
    if not 0 <= k < a.size:
        raise ValueError(f"class index {k} out of range for {a.size} classes")
    s = float(a.sum())
    p = float(a[k]) / s
    return p * (1.0 - p) / (s + 1.0)


def uncertainty_measures(m: BeliefAssignment, num_classes: int) -> UncertaintyMeasures:
    """Vacuity, winning-class Dirichlet variance, and normalized entropy."""
    if num_classes != m.num_classes:
        raise ValueError(
            f"opinion has {m.num_classes} classes, expected {num_classes}"
        )
    p = projected_probabilities(m)
    k_star = int(np.argmax(p))
    if m.u > 0.0:
        s = num_classes / m.u
        var = float(p[k_star]) * (1.0 - float(p[k_star])) / (s + 1.0)
    else:
        # Dogmatic opinion: infinite strength, zero posterior spread.
        var = 0.0
    pos = p[p > 0.0]
    entropy = float(-np.sum(pos * np.log(pos)))
    return UncertaintyMeasures(
        vacuity=m.u,
        dirichlet_variance=var,
        expected_entropy_norm=entropy / math.log(num_classes),
    )


def select_uncertainty(m: BeliefAssignment, num_classes: int, measure: str) -> float:
    """One named measure from ``uncertainty_measures``; default callers use vacuity."""
    values = uncertainty_measures(m, num_classes)
    if measure == "vacuity":
        return values.vacuity
    if measure == "variance":
        return values.dirichlet_variance
    if measure == "entropy":
        return values.expected_entropy_norm
    raise ValueError(
        f"unknown uncertainty measure {measure!r}; expected one of {UNCERTAINTY_MEASURES}"
    )


def pseudo_evidence_from_probs(p, strength: float) -> ClassEvidence:
    """Adapter for softmax-only outputs: e_k = strength * p_k."""
    probs = _vector(p, "probabilities")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ValueError(f"probabilities must sum to 1, got {float(probs.sum())!r}")
    strength = float(strength)
    if not math.isfinite(strength) or strength < 0.0:
        raise ValueError(f"strength must be finite and >= 0, got {strength!r}")
    return ClassEvidence(e=strength * probs)


def _evidence_matrix(evidence) -> np.ndarray:
    ev = np.asarray(evidence, dtype=np.float64)
    if ev.ndim != 2 or ev.shape[1] < 2:
        raise ValueError(f"evidence must be an (N, K>=2) matrix, got shape {ev.shape}")
    if not np.all(np.isfinite(ev)):
        raise ValueError("evidence must be finite")
    if np.any(ev < 0.0):
        raise ValueError("evidence must be non-negative")
    return ev


def belief_masses_from_evidence(evidence) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise evidence -> opinion conversion for an (N, K) matrix.

    Returns (B, u) with B[i] = e_i / S_i and u[i] = K / S_i where
    S_i = sum(e_i) + K; the vectorized form of
    ``dirichlet_to_belief(evidence_to_dirichlet(...))``.
    """
    ev = _evidence_matrix(evidence)
    k = ev.shape[1]
    s = ev.sum(axis=1) + k
    return ev / s[:, None], k / s


def expected_probabilities_from_evidence(evidence) -> np.ndarray:
    """Row-wise Dirichlet means (e_i + 1) / S_i for an (N, K) matrix."""
    ev = _evidence_matrix(evidence)
    k = ev.shape[1]
    s = ev.sum(axis=1) + k
    return (ev + 1.0) / s[:, None]
