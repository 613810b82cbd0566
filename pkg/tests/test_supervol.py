"""Tests for the super Weil-Petersson volumes and recursion checks.

Exact coefficients are frozen from independent derivations (spin
correlator values times translation weights computed by hand); the
numeric kernel moments are cross-validated between two quadrature
schemes and against exact closed forms discovered empirically at
high precision.
"""

from fractions import Fraction
from itertools import permutations

import mpmath as mp
import pytest

from superkdv.exactcore import ExactCoreError, FormalPolynomial, Truncation
from superkdv.spincorr import assemble_z_omega, spin_correlators
from superkdv.supervol import (
    PASSING_CONVENTION,
    kernel_moment,
    recursion_residual,
    recursion_residual_orders,
    spin_value,
    translated_virasoro_check,
    volume_polynomial,
)
from superkdv.virasoro import VirasoroSpec, apply_virasoro_oracle


def pi2_poly(c: Fraction, power: int = 1) -> FormalPolynomial:
    return FormalPolynomial.symbol("pi2", power).scale(c)


class TestSpinValue:
    def test_frozen_values(self):
        assert spin_value(1, (0,)) == Fraction(1, 8)
        assert spin_value(1, (1,)) == Fraction(5, 48)
        assert spin_value(2, (1,)) == Fraction(3, 128)
        assert spin_value(0, (0, 0, 0)) == 1

    def test_matches_table_route(self):
        table = spin_correlators(Truncation(gmax=2, kmax=3, dmax=3, smax=6))
        checked = 0
        for (g, k), v in table.entries.items():
            assert spin_value(g, k) == v, (g, k)
            checked += 1
        assert checked > 20

    def test_rejects_empty_and_negative(self):
        with pytest.raises(ExactCoreError):
            spin_value(1, ())
        with pytest.raises(ExactCoreError):
            spin_value(0, (-1,))


class TestVolumePolynomial:
    def test_one_one(self):
        vp = volume_polynomial(1, 1, 4)
        assert vp.coefficient(0, (0,)) == Fraction(1, 8)
        assert vp.coefficient(1, (1,)) == Fraction(5, 96)
        assert vp.coefficient(1, (0,)) == pi2_poly(Fraction(5, 8))

    def test_zero_three(self):
        vp = volume_polynomial(0, 3, 4)
        assert vp.coefficient(1, (0, 0, 0)) == 1

    def test_one_two_s_zero_constant(self):
        vp = volume_polynomial(1, 2, 2)
        assert vp.coefficient(0, (0, 0)) == Fraction(1, 8)
        # s^0 slice is constant in L for g = 1
        assert all(k == (0, 0) for (a, k) in vp.terms if a == 0)

    def test_symmetry_under_slot_permutation(self):
        vp = volume_polynomial(0, 4, 4)
        seen = 0
        for (a, k), poly in vp.terms.items():
            for perm in permutations(k):
                assert vp.coefficient(a, perm) == poly
                seen += 1
        assert seen > 10

    def test_unstable_pieces_exist(self):
        v01 = volume_polynomial(0, 1, 4)
        v02 = volume_polynomial(0, 2, 4)
        assert not v01.terms.get((0, (0,)))  # no s^0 disk term
        assert v02.coefficient(1, (0, 0)) == Fraction(1, 2)

    def test_invalid_inputs(self):
        with pytest.raises(ExactCoreError):
            volume_polynomial(1, 0, 4)
        with pytest.raises(ExactCoreError):
            volume_polynomial(1, 1, 3)

    def test_json_schema(self):
        data = volume_polynomial(1, 1, 2).to_json()
        assert data["g"] == 1 and data["n"] == 1
        entry = next(t for t in data["terms"] if t["s2"] == 0)
        assert entry["k"] == [0]
        assert entry["pi2"] == [[0, "1/8"]]

    def test_evaluate(self):
        vp = volume_polynomial(1, 1, 2)
        value = vp.evaluate(1.0, [2.0])
        expected = (
            mp.mpf(1) / 8
            + mp.mpf(5) / 96 * 4
            + mp.mpf(5) / 8 * mp.pi**2
        )
        assert abs(value - expected) < mp.mpf(10) ** -12


class TestExactRoute:
    def test_translated_virasoro_all_zero(self):
        report = translated_virasoro_check(Truncation(1, 2, 3, 4))
        assert report["all_zero"]
        assert report["m_checked"] == [0, 1, 2]

    def test_perturbation_sensitivity(self):
        trunc = Truncation(1, 2, 3, 4)
        Z = assemble_z_omega(trunc).with_window(trunc.z_window())
        key = (-1, 1, ((0, 1),))
        from superkdv.exactcore import GradedSeries

        perturbed = GradedSeries(
            Z.trunc,
            {k: (v + Fraction(1, 7) if k == key else v) for k, v in Z.terms.items()},
        )
        res = apply_virasoro_oracle(perturbed, VirasoroSpec("gBGW"), 0)
        assert not res.restrict(trunc).is_zero()


class TestKernelMoments:
    def test_zero_at_zero_length(self):
        assert abs(kernel_moment("R", (0, 0), (0,))) < mp.mpf(10) ** -12
        assert abs(kernel_moment("D", (0,), (0, 0))) < mp.mpf(10) ** -12

    def test_scheme_cross_validation(self):
        a = kernel_moment("D", (1.0,), (0, 0), method="tanh-sinh")
        b = kernel_moment("D", (1.0,), (0, 0), method="gauss-legendre")
        assert abs(a - b) < mp.mpf(10) ** -10

    def test_exact_closed_forms(self):
        # discovered at high precision: the first moments are exactly
        # 2 pi L and 2 pi (L^3/6 + 2 pi^2 L)
        with mp.workdps(50):
            for l1 in (0.5, 1.0, 2.0):
                r = kernel_moment("R", (l1, 0.7), (0,))
                assert abs(r - 2 * mp.pi * mp.mpf(l1)) < mp.mpf(10) ** -11
            l1 = mp.mpf(1.0)
            d = kernel_moment("D", (l1,), (0, 0))
            expected = 2 * mp.pi * (l1**3 / 6 + 2 * mp.pi**2 * l1)
            assert abs(d - expected) < mp.mpf(10) ** -11

    def test_bad_inputs(self):
        with pytest.raises(ExactCoreError):
            kernel_moment("R", (1.0, 1.0), (-1,))
        with pytest.raises(ExactCoreError):
            kernel_moment("Q", (1.0,), (0,))


class TestRecursionResidual:
    def test_one_one_at_s_zero(self):
        assert recursion_residual(1, 1, 0.0, [1.0], smax=2) < mp.mpf(10) ** -9

    def test_zero_one_delta_identity(self):
        orders = recursion_residual_orders(0, 1, [1.3], smax=2)
        assert abs(orders[1]) < mp.mpf(10) ** -9

    def test_passing_convention_through_s4(self):
        for g, n, L in [(1, 1, [1.0]), (0, 3, [1.0, 0.7, 1.3])]:
            orders = recursion_residual_orders(g, n, L, smax=4, **PASSING_CONVENTION)
            for a, v in orders.items():
                assert abs(v) < mp.mpf(10) ** -8, (g, n, a)

    def test_failing_convention_is_large(self):
        orders = recursion_residual_orders(
            1, 1, [1.0], smax=2, include_v01=False, include_v02=False
        )
        assert abs(orders[1]) > 1

    def test_residual_combines_orders(self):
        r = recursion_residual(1, 1, 0.5, [1.0], smax=4, **PASSING_CONVENTION)
        assert r < mp.mpf(10) ** -8
