import math

import numpy as np
import pytest

from hflow import forms6 as f
from hflow.errors import NotClosed, NotPrimitive, NotStable
from hflow.examples_builtin import (family_pair, w1w3_positive_scalar,
                                    w1w3_zero_scalar)

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)

SIX_TERM = f.Form.from_terms(3, {(3, 5, 2): 1.0, (1, 4, 6): 1.0, (5, 1, 4): 1.0,
                                 (3, 6, 2): 1.0, (1, 3, 6): 1.0, (5, 2, 4): 1.0})


class TestWedge:
    def test_basis_case(self):
        assert f.pretty(f.wedge(f.Form.basis(1), f.Form.basis(2))) == "+1 e12"

    def test_omega0_cubed(self):
        w0 = f.OMEGA0
        w03 = f.wedge(w0, f.wedge(w0, w0))
        assert f.volume_coefficient(w03) == pytest.approx(6.0, abs=0)
        assert np.count_nonzero(w03.coeffs) == 1

    def test_primitivity_of_example_pair(self):
        omega, gamma, _ = w1w3_positive_scalar()
        assert f.wedge(gamma, omega).norm() < 1e-14

    def test_against_brute_force_oracle(self, rng, wedge_oracle):
        for k, l in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (1, 5), (2, 4)]:
            a = f.Form(k, rng.normal(size=len(f.INDICES[k])))
            b = f.Form(l, rng.normal(size=len(f.INDICES[l])))
            got = f.wedge(a, b)
            want = wedge_oracle(a, b)
            assert (got - want).norm() < 1e-12 * max(1.0, want.norm())

    def test_graded_anticommutativity(self):
        for k in range(0, 4):
            for l in range(0, 4):
                for idx_a in f.INDICES[k][:4]:
                    for idx_b in f.INDICES[l][:4]:
                        a = f.Form.basis(*idx_a)
                        b = f.Form.basis(*idx_b)
                        lhs = f.wedge(a, b)
                        rhs = (-1.0) ** (k * l) * f.wedge(b, a)
                        assert (lhs - rhs).norm() == 0.0

    def test_above_top_degree_is_zero_form(self):
        out = f.wedge(f.Form.basis(1, 2, 3, 4), f.Form.basis(1, 2, 3))
        assert out.degree == 7 and out.coeffs.size == 0


class TestExteriorDerivative:
    def test_structure_equations(self):
        assert f.pretty(f.ext_d(f.Form.basis(1))) == "+1 e35"
        assert f.pretty(f.ext_d(f.Form.basis(2))) == "+1 e46"
        assert f.pretty(f.ext_d(f.Form.basis(3))) == "-1 e15"
        assert f.pretty(f.ext_d(f.Form.basis(4))) == "-1 e26"
        assert f.pretty(f.ext_d(f.Form.basis(5))) == "+1 e13"
        assert f.pretty(f.ext_d(f.Form.basis(6))) == "+1 e24"

    def test_leibniz_on_basis_two_form(self):
        # d(e12) = e352 - e146 = e235 - e146
        want = f.Form.from_terms(3, {(2, 3, 5): 1.0, (1, 4, 6): -1.0})
        assert (f.ext_d(f.Form.basis(1, 2)) - want).norm() == 0.0
        # the completion is pinned by d(e34) and d(e56)
        want34 = f.Form.from_terms(3, {(1, 4, 5): 1.0, (2, 3, 6): -1.0})
        assert (f.ext_d(f.Form.basis(3, 4)) - want34).norm() == 0.0
        want56 = f.Form.from_terms(3, {(1, 3, 6): 1.0, (2, 4, 5): -1.0})
        assert (f.ext_d(f.Form.basis(5, 6)) - want56).norm() == 0.0

    def test_d_squared_zero_on_basis(self):
        for k in range(0, 6):
            for idx in f.INDICES[k]:
                assert f.ext_d(f.ext_d(f.Form.basis(*idx))).norm() == 0.0

    def test_d_squared_zero_random_one_forms(self, rng):
        for _ in range(100):
            a = f.Form(1, rng.normal(size=6))
            assert f.ext_d(f.ext_d(a)).norm() < 1e-14


class TestHitchinLambda:
    def test_printed_value_positive_scalar_example(self):
        _, gamma, _ = w1w3_positive_scalar(a=2.0)
        assert f.hitchin_lambda(gamma) == pytest.approx(-27.0, abs=1e-12)

    def test_family_formula(self, rng):
        dw0 = f.ext_d(f.OMEGA0)
        for _ in range(25):
            x, a = rng.normal(size=2)
            gamma = x * dw0 + a * (f.E135 - f.E246)
            want = (a - 3 * x) * (x + a) ** 3
            assert f.hitchin_lambda(gamma) == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_conical_case(self):
        gamma = f.ext_d(f.OMEGA0)  # x = 1, a = 0
        assert f.hitchin_lambda(gamma) == pytest.approx(-3.0, abs=1e-13)

    def test_decomposable_is_zero(self):
        assert f.hitchin_lambda(f.E135) == 0.0

    def test_real_type_value(self, rng):
        a, b = 2.0, 3.0
        assert f.hitchin_lambda(a * f.E135 + b * f.E246) == pytest.approx(
            (a * b) ** 2, rel=1e-13)

    def test_quartic_homogeneity(self, rng):
        for _ in range(20):
            gamma = f.Form(3, rng.normal(size=20))
            t = rng.normal()
            assert f.hitchin_lambda(t * gamma) == pytest.approx(
                t ** 4 * f.hitchin_lambda(gamma), rel=1e-10, abs=1e-12)


class TestHitchinDual:
    def test_positive_scalar_example_printed(self):
        a = 2.0
        _, gamma, _ = w1w3_positive_scalar(a=a)
        want = -(SQRT3 / 2.0) * a * SIX_TERM
        assert (f.hitchin_dual(gamma) - want).norm() < 1e-12

    def test_zero_scalar_example_printed(self):
        b = 1.0
        _, gamma, _ = w1w3_zero_scalar(b=b)
        lam = f.hitchin_lambda(gamma)
        lhs = -math.sqrt(-lam) * f.hitchin_dual(gamma)
        want = (2 * (SQRT5 - 1) * b ** 3 * (f.E135 + f.E246)
                + 2 * (3 + SQRT5) * b ** 3 * SIX_TERM)
        assert (lhs - want).norm() < 1e-10

    def test_family_dual_and_its_derivative(self):
        # the exact-part coefficient of the dual goes with x, the class
        # part with (a - 2x); its d recovers the proportional 4-form
        x, a = -2.0, 1.0
        omega, gamma, _ = family_pair(x, a)
        lam = (a - 3 * x) * (x + a) ** 3
        ghat = f.hitchin_dual(gamma)
        want = -((a - 2 * x) * (a + x) ** 2 * (f.E135 + f.E246)
                 + x * (a + x) ** 2 * SIX_TERM) / math.sqrt(-lam)
        assert (ghat - want).norm() < 1e-12 * want.norm()
        w02 = f.wedge(f.OMEGA0, f.OMEGA0)
        dghat = f.ext_d(ghat)
        target = (x * (x + a) ** 2 / math.sqrt(-lam)) * w02
        assert (dghat - target).norm() < 1e-12 * target.norm()

    def test_not_stable_cases(self):
        with pytest.raises(NotStable):
            f.hitchin_dual(f.E135)
        with pytest.raises(NotStable):
            f.hitchin_dual(f.E135 + f.E246)  # lambda > 0

    def test_double_dual_is_minus_identity(self, rng):
        _, gamma, _ = w1w3_positive_scalar(a=1.3)
        assert (f.hitchin_dual(f.hitchin_dual(gamma)) + gamma).norm() < 1e-12

    def test_degree_one_homogeneity(self, rng):
        _, gamma, _ = w1w3_positive_scalar(a=1.0)
        for t in (2.0, 0.3, -1.7):
            lhs = f.hitchin_dual(t * gamma)
            rhs = t * f.hitchin_dual(gamma)
            assert (lhs - rhs).norm() < 1e-12 * rhs.norm()


class TestMetric:
    def test_positive_scalar_example_metric(self):
        omega, gamma, info = w1w3_positive_scalar(a=1.0)
        mt = f.su3_metric(omega, gamma)
        coef = SQRT3 / 2.0 * info["alpha"] * info["a"]
        want = np.zeros((6, 6))
        for i in range(3):
            want[2 * i:2 * i + 2, 2 * i:2 * i + 2] = coef * np.array(
                [[1.0, 0.5], [0.5, 1.0]])
        assert mt.definite
        assert np.abs(mt.g - want).max() < 1e-13

    def test_zero_scalar_example_metric(self):
        b = 1.0
        omega, gamma, info = w1w3_zero_scalar(b=b)
        lam = f.hitchin_lambda(gamma)
        mt = f.su3_metric(omega, gamma)
        blk = -2 * info["a"] * b * b / math.sqrt(-lam) * np.array(
            [[1 + SQRT5, 2.0], [2.0, 1 + SQRT5]])
        want = np.zeros((6, 6))
        for i in range(3):
            want[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blk
        assert mt.definite
        assert np.abs(mt.g - want).max() < 1e-13

    def test_family_metric_printed(self):
        x, a = -2.0, 1.0
        omega, gamma, info = family_pair(x, a)
        mt = f.su3_metric(omega, gamma)
        pref = -3 * info["alpha"] * x / math.sqrt((3 * x - a) * (x + a))
        want = np.zeros((6, 6))
        for i in range(3):
            want[2 * i:2 * i + 2, 2 * i:2 * i + 2] = pref * np.array(
                [[x, (a - x) / 2], [(a - x) / 2, x]])
        assert mt.definite
        assert np.abs(mt.g - want).max() < 1e-12

    def test_negated_omega_is_indefinite(self):
        omega, gamma, _ = w1w3_positive_scalar()
        mt = f.su3_metric(-1.0 * omega, gamma)
        assert not mt.definite

    def test_not_primitive(self):
        omega, gamma, _ = w1w3_positive_scalar()
        with pytest.raises(NotPrimitive):
            f.su3_metric(omega + f.Form.basis(1, 4), gamma)

    def test_not_stable(self):
        with pytest.raises(NotStable):
            f.su3_metric(f.OMEGA0, 2.0 * f.E135 + f.E246)


class TestNormalizationResidual:
    def test_examples_are_normalized(self):
        omega, gamma, _ = w1w3_positive_scalar(a=1.0)
        assert abs(f.normalization_residual_forms(omega, gamma)) < 1e-12
        omega, gamma, _ = w1w3_zero_scalar(b=1.0)
        assert abs(f.normalization_residual_forms(omega, gamma)) < 1e-12

    def test_scaled_omega_residual_matches_expansion(self, wedge_oracle):
        omega, gamma, _ = w1w3_positive_scalar(a=1.0)
        got = f.normalization_residual_forms(2.0 * omega, gamma)
        # oracle: 3 gamma^dual - 16 omega^3 expanded by brute force
        ghat = f.hitchin_dual(gamma)
        lhs = 3.0 * wedge_oracle(gamma, ghat)
        w3 = wedge_oracle(omega, wedge_oracle(omega, omega))
        want = f.volume_coefficient(lhs - 16.0 * w3)
        assert got == pytest.approx(want, rel=1e-12)
        # equals -14 * (omega^3 coefficient) since the pair is normalized
        assert got == pytest.approx(-14.0 * f.volume_coefficient(w3), rel=1e-12)

    def test_stability_required(self):
        with pytest.raises(NotStable):
            f.normalization_residual_forms(f.OMEGA0, f.E135)


class TestCohomologyClass:
    def test_positive_scalar_example_class(self):
        _, gamma, _ = w1w3_positive_scalar(a=1.5)
        a, b = f.cohomology_class(gamma)
        assert a == pytest.approx(1.5, abs=1e-12)
        assert b == pytest.approx(-1.5, abs=1e-12)

    def test_exact_form_has_zero_class(self):
        a, b = f.cohomology_class(f.ext_d(f.Form.basis(1, 2)))
        assert abs(a) < 1e-13 and abs(b) < 1e-13

    def test_family_class(self):
        omega, gamma, _ = family_pair(-1.5, 0.7)
        a, b = f.cohomology_class(gamma)
        assert a == pytest.approx(0.7, abs=1e-12)
        assert b == pytest.approx(-0.7, abs=1e-12)

    def test_exact_part_matrix_recovery(self, rng):
        N = rng.normal(size=(3, 3))
        gamma = 0.4 * f.E135 - 1.1 * f.E246
        for i in range(3):
            for j in range(3):
                gamma = gamma + N[i, j] * f.ext_d(
                    f.Form.basis(2 * (i + 1) - 1, 2 * (j + 1)))
        a, b, N2 = f.exact_part_matrix(gamma)
        assert a == pytest.approx(0.4, abs=1e-12)
        assert b == pytest.approx(-1.1, abs=1e-12)
        assert np.abs(N2 - N).max() < 1e-12

    def test_not_closed(self):
        with pytest.raises(NotClosed):
            f.cohomology_class(f.Form.basis(1, 2, 3))


def test_pretty_printer():
    form = 2.0 * f.E135 - 1.0 * f.E246
    assert f.pretty(form) == "+2 e135 -1 e246"
    assert f.pretty(f.Form(2)) == "0"


def test_forms_are_immutable():
    with pytest.raises(Exception):
        f.OMEGA0.degree = 3
    with pytest.raises(ValueError):
        f.OMEGA0.coeffs[0] = 5.0
