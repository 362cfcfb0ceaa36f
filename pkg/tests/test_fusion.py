"""Discounting and reduced Dempster combination."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mass_pairs, mass_triples, masses
from evmap.evidence import BeliefAssignment, vacuous_mass
from evmap.fusion import (
    TotalConflictError,
    combine,
    combine_arrays,
    conflict,
    discount,
    fuse_sequence,
)


def assert_masses_close(m1, m2, tol):
    assert np.max(np.abs(m1.b - m2.b)) <= tol
    assert abs(m1.u - m2.u) <= tol


class TestDiscount:
    def test_full_trust_is_identity(self):
        m = BeliefAssignment([0.6, 0.2], 0.2)
        d = discount(m, 1.0)
        assert np.array_equal(d.b, m.b)
        assert d.u == m.u

    def test_zero_trust_is_vacuous(self):
        d = discount(BeliefAssignment([0.6, 0.2], 0.2), 0.0)
        assert np.array_equal(d.b, [0.0, 0.0])
        assert d.u == 1.0

    def test_half_trust(self):
        d = discount(BeliefAssignment([0.6, 0.2], 0.2), 0.5)
        assert d.b == pytest.approx([0.3, 0.1], abs=1e-15)
        assert d.u == pytest.approx(0.6, abs=1e-15)

    def test_weight_out_of_range(self):
        m = BeliefAssignment([0.6, 0.2], 0.2)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            discount(m, 1.5)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            discount(m, -0.1)

    @given(masses(), st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False))
    def test_composition(self, m, w1, w2):
        once = discount(m, w1 * w2)
        twice = discount(discount(m, w1), w2)
        assert_masses_close(once, twice, 1e-12)

    @given(masses(), st.floats(0, 1, allow_nan=False))
    def test_output_valid(self, m, w):
        d = discount(m, w)
        assert abs(float(d.b.sum()) + d.u - 1.0) < 1e-9


class TestConflict:
    def test_vacuous_has_no_conflict(self):
        m = BeliefAssignment([0.5, 0.3], 0.2)
        assert conflict(m, vacuous_mass(2)) == 0.0

    def test_cross_term(self):
        m1 = BeliefAssignment([0.5, 0.0], 0.5)
        m2 = BeliefAssignment([0.0, 0.5], 0.5)
        assert conflict(m1, m2) == pytest.approx(0.25, abs=0)

    def test_total_conflict(self):
        m1 = BeliefAssignment([1.0, 0.0], 0.0)
        m2 = BeliefAssignment([0.0, 1.0], 0.0)
        assert conflict(m1, m2) == 1.0

    def test_frame_mismatch(self):
        with pytest.raises(ValueError, match="frame"):
            conflict(vacuous_mass(2), vacuous_mass(3))

    @given(mass_pairs())
    def test_range_and_symmetry(self, pair):
        m1, m2 = pair
        c = conflict(m1, m2)
        assert 0.0 <= c <= 1.0
        assert c == pytest.approx(conflict(m2, m1), abs=1e-15)


class TestCombine:
    def test_vacuous_is_identity(self):
        m = BeliefAssignment([0.5, 0.2], 0.3)
        for fused in (combine(m, vacuous_mass(2)), combine(vacuous_mass(2), m)):
            assert_masses_close(fused, m, 1e-12)

    def test_cross_conflict_case(self):
        m1 = BeliefAssignment([0.5, 0.0], 0.5)
        m2 = BeliefAssignment([0.0, 0.5], 0.5)
        fused = combine(m1, m2)
        assert fused.b == pytest.approx([1 / 3, 1 / 3], abs=1e-15)
        assert fused.u == pytest.approx(1 / 3, abs=1e-15)

    def test_self_combination(self):
        m = BeliefAssignment([0.5, 0.0], 0.5)
        fused = combine(m, m)
        assert fused.b == pytest.approx([0.75, 0.0], abs=0)
        assert fused.u == pytest.approx(0.25, abs=0)

    def test_total_conflict_raises(self):
        m1 = BeliefAssignment([1.0, 0.0], 0.0)
        m2 = BeliefAssignment([0.0, 1.0], 0.0)
        with pytest.raises(TotalConflictError):
            combine(m1, m2)

    def test_frame_mismatch(self):
        with pytest.raises(ValueError, match="frame"):
            combine(vacuous_mass(2), vacuous_mass(3))

    @given(mass_pairs())
    def test_commutative(self, pair):
        m1, m2 = pair
        assert_masses_close(combine(m1, m2), combine(m2, m1), 1e-12)

    @given(mass_triples())
    @settings(max_examples=200)
    def test_associative(self, triple):
        m1, m2, m3 = triple
        left = combine(combine(m1, m2), m3)
        right = combine(m1, combine(m2, m3))
        assert_masses_close(left, right, 1e-9)

    @given(mass_pairs())
    def test_unclamped_output_nearly_normalized(self, pair):
        m1, m2 = pair
        b, u = combine_arrays(m1.b, m1.u, m2.b, m2.u, clamp=False)
        total = float(b.sum()) + u
        assert abs(total - 1.0) < 1e-9
        assert np.all(b >= -1e-12) and np.all(b <= 1.0 + 1e-12)
        assert -1e-12 <= u <= 1.0 + 1e-12

    @given(mass_pairs())
    def test_agreeing_argmax_is_preserved(self, pair):
        # Termwise: if b1 and b2 both peak at k*, every numerator term of
        # class k* dominates the other classes' terms, so the fused opinion
        # peaks at k* too.  (The fused peak belief can still drop below the
        # stronger input when the weaker one spreads mass over rivals.)
        m1, m2 = pair
        k1 = int(np.argmax(m1.b))
        k2 = int(np.argmax(m2.b))
        if k1 != k2:
            return
        fused = combine(m1, m2)
        assert fused.b[k1] >= np.max(fused.b) - 1e-12

    @given(masses())
    def test_self_fusion_reinforces_the_peak(self, m):
        k = int(np.argmax(m.b))
        fused = combine(m, m)
        assert fused.b[k] >= m.b[k] - 1e-12


class TestFuseSequence:
    def test_single_element(self):
        m = BeliefAssignment([0.4, 0.1], 0.5)
        fused = fuse_sequence([m])
        assert_masses_close(fused, m, 0)

    def test_vacuous_padding_is_neutral(self):
        m = BeliefAssignment([0.4, 0.1], 0.5)
        fused = fuse_sequence([m, vacuous_mass(2), vacuous_mass(2)])
        assert_masses_close(fused, m, 1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            fuse_sequence([])

    def test_fold_direction_agrees(self):
        rng = np.random.default_rng(77)
        from conftest import random_mass

        for _ in range(25):
            ms = [random_mass(rng, 3, min_u=0.05) for _ in range(3)]
            left = fuse_sequence(ms)
            right = combine(ms[0], combine(ms[1], ms[2]))
            assert_masses_close(left, right, 1e-9)
