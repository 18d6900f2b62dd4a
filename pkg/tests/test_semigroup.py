import numpy as np
import pytest

from outail import (
    MixtureDensity,
    QuadratureRule,
    SemigroupQuery,
    SinePerturbationDensity,
    TiltDensity,
    constant_density,
    heat_apply,
    heat_grad_log,
    heat_log,
    hypercontractivity_check,
    nelson_exponent,
    ou_apply,
    ou_apply_mc,
    ou_log,
    ou_log_hessian_min_eig,
)
from outail.errors import BandwidthFloorError, ClosedFormUnavailableError
from outail.semigroup import heat_grad_log_quadrature, log_lp_norm

RULE = QuadratureRule.gauss_hermite(1, 64)
MIX = MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
SINE = SinePerturbationDensity(0.3, [2.0])


class TestOuApply:
    def test_constant_is_fixed_point(self):
        for t in (0.05, 0.5, 2.0):
            for x in (-1.0, 0.0, 2.5):
                q = SemigroupQuery(constant_density(1), t, np.array([x]))
                assert ou_apply(q) == pytest.approx(1.0, abs=1e-13)

    def test_tilt_half_life_value(self):
        # alpha e^-t = 1/2 at alpha = 1, t = log 2; value at 0 is e^{-1/8}
        q = SemigroupQuery(TiltDensity([1.0]), np.log(2.0), np.array([0.0]))
        assert ou_apply(q) == pytest.approx(np.exp(-0.125), rel=1e-10)

    def test_closed_matches_quadrature_on_grid(self):
        for alpha in (0.5, 1.5, 3.0):
            tilt = TiltDensity([alpha])
            for t in (0.1, 0.7, 2.0):
                for x in (-2.0, 0.3, 1.7):
                    quad = ou_apply(SemigroupQuery(tilt, t, np.array([x])))
                    closed = ou_apply(SemigroupQuery(tilt, t, np.array([x]), method="closed_form"))
                    assert quad == pytest.approx(closed, rel=1e-10)

    def test_mixture_quadrature_vs_monte_carlo(self):
        x = np.array([0.3])
        quad = ou_apply(SemigroupQuery(MIX, 0.5, x))
        mc, se = ou_apply_mc(MIX, 0.5, x, n_samples=10**6, seed=3)
        assert abs(mc - quad) <= 3.0 * se

    def test_closed_form_unavailable(self):
        with pytest.raises(ClosedFormUnavailableError):
            ou_apply(SemigroupQuery(SINE, 0.5, np.array([0.0]), method="closed_form"))

    def test_mc_deterministic(self):
        x = np.array([0.1])
        a = ou_apply_mc(MIX, 0.3, x, 10**4, seed=9)
        b = ou_apply_mc(MIX, 0.3, x, 10**4, seed=9)
        assert a == b


class TestHeatApply:
    def test_tiny_bandwidth_recovers_f(self):
        for d in (MIX, SINE):
            for x in (-1.2, 0.4):
                val = heat_apply(SemigroupQuery(d, 1e-6, np.array([x])))
                assert val == pytest.approx(float(np.exp(d.log_f(np.array([x])))), abs=1e-4)

    def test_tilt_closed_formula(self):
        alpha, s, x = 1.4, 0.6, 0.8
        tilt = TiltDensity([alpha])
        expected = np.exp(alpha * x - alpha**2 / 2 + alpha**2 * s / 2)
        quad = heat_apply(SemigroupQuery(tilt, s, np.array([x])))
        closed = heat_apply(SemigroupQuery(tilt, s, np.array([x]), method="closed_form"))
        assert closed == pytest.approx(expected, rel=1e-14)
        assert quad == pytest.approx(expected, rel=1e-10)

    def test_mass_conserved_for_constant(self):
        assert heat_apply(SemigroupQuery(constant_density(1), 1.0, np.array([3.0]))) == pytest.approx(
            1.0, abs=1e-13
        )


class TestHeatGradLog:
    def test_tilt_gradient_is_constant(self):
        tilt = TiltDensity([1.7])
        for s in (0.01, 0.5, 1.0):
            for x in (-2.0, 0.0, 1.3):
                g = heat_grad_log(SemigroupQuery(tilt, s, np.array([x])))
                assert float(g) == pytest.approx(1.7, rel=1e-9)

    def test_constant_density_zero_gradient(self):
        g = heat_grad_log(SemigroupQuery(constant_density(1), 0.5, np.array([1.0])))
        assert abs(float(g)) < 1e-12

    def test_matches_finite_differences_of_heat_log(self):
        s, h = 0.5, 1e-5
        for x in (-0.7, 0.0, 1.1):
            g = heat_grad_log_quadrature(MIX, s, np.array([x]), RULE)[0]
            num = float(heat_log(MIX, s, np.array([x + h]), RULE))
            den = float(heat_log(MIX, s, np.array([x - h]), RULE))
            assert g == pytest.approx((num - den) / (2 * h), abs=1e-6)

    def test_bandwidth_floor_raises(self):
        with pytest.raises(BandwidthFloorError):
            heat_grad_log_quadrature(MIX, 1e-5, np.array([0.0]), RULE)

    def test_closed_form_bypasses_floor(self):
        g = heat_grad_log(SemigroupQuery(MIX, 1e-5, np.array([0.4]), method="closed_form"))
        expected = np.ravel(MIX.grad_log_f(np.array([0.4])))[0]
        assert np.ravel(g)[0] == pytest.approx(expected, abs=1e-4)


class TestLogHessianFloor:
    def test_constant_density_margin_is_floor(self):
        for t in (0.1, 0.5, 1.0):
            m = ou_log_hessian_min_eig(constant_density(1), t, np.array([0.7]))
            assert m == pytest.approx(0.5 / t, abs=1e-6 / t)

    def test_tilt_margin_is_floor(self):
        m = ou_log_hessian_min_eig(TiltDensity([2.0]), 0.5, np.array([-1.0]))
        assert m == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("density", [MIX, SINE], ids=["mixture", "sine"])
    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
    def test_smoothed_families_respect_floor(self, density, t):
        for x in np.linspace(-3, 3, 13):
            assert ou_log_hessian_min_eig(density, t, np.array([x])) >= -1e-5

    def test_t_positive_required(self):
        with pytest.raises(ValueError):
            ou_log_hessian_min_eig(MIX, 0.0, np.array([0.0]))


class TestNelsonExponent:
    def test_doubling_time(self):
        assert nelson_exponent(2.0, np.log(2.0)) == pytest.approx(5.0, rel=1e-14)

    def test_zero_time_limit(self):
        assert nelson_exponent(2.0, 1e-12) == pytest.approx(2.0, abs=1e-10)

    def test_direct_value(self):
        assert nelson_exponent(1.5, 1.0) == pytest.approx(1.0 + np.exp(2.0) * 0.5, rel=1e-14)

    def test_rejects_p_at_most_one(self):
        with pytest.raises(ValueError):
            nelson_exponent(1.0, 0.5)


class TestHypercontractivity:
    def test_constant_density_both_norms_one(self):
        rep = hypercontractivity_check(constant_density(1), 2.0, 0.5)
        assert rep.estimate == pytest.approx(1.0, abs=1e-12)
        assert rep.bound == pytest.approx(1.0, abs=1e-12)
        assert rep.passed

    def test_tilt_is_the_equality_case(self):
        # ||f_a||_p = e^{a^2 (p-1)/2} and the critical exponent exactly
        # compensates the OU shrinkage of the tilt
        alpha, p, t = 1.0, 2.0, 0.5
        tilt = TiltDensity([alpha])
        rep = hypercontractivity_check(tilt, p, t)
        expected = np.exp(alpha**2 * (p - 1) / 2)
        assert rep.bound == pytest.approx(expected, rel=1e-10)
        assert rep.estimate == pytest.approx(expected, rel=1e-8)
        assert rep.passed

    def test_mixture_contracts_strictly(self):
        rep = hypercontractivity_check(MIX, 2.0, 0.3)
        assert rep.passed and rep.margin > 0

    def test_lp_norm_closed_form(self):
        tilt = TiltDensity([1.2])
        for p in (1.5, 2.0, 4.0):
            got = log_lp_norm(tilt.log_f, p, RULE)
            assert got == pytest.approx(1.2**2 * (p - 1) / 2, rel=1e-9)


class TestSemigroupAlgebra:
    def test_flow_property_tilt(self):
        # Q_{t+s} f = Q_t (Q_s f): inner image closed, outer by quadrature
        tilt = TiltDensity([2.0])
        t, s = 0.4, 0.9
        inner = tilt.closed_ou(s)
        for x in (-1.0, 0.2, 2.0):
            lhs = float(ou_log(tilt, t + s, np.array([x]), RULE))
            rhs = float(ou_log(inner, t, np.array([x]), RULE))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("density", [TiltDensity([1.0]), MIX, SINE],
                             ids=["tilt", "mixture", "sine"])
    @pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
    def test_mass_conservation(self, density, t):
        vals = np.exp(ou_log(density, t, RULE.nodes, RULE))
        assert float(RULE.weights @ vals) == pytest.approx(1.0, abs=1e-9)

    def test_markov_baseline_tilt_tails(self):
        for alpha in (0.8, 2.0, 4.0):
            tilt = TiltDensity([alpha])
            for t in (0.0, 0.5):
                for r in (1.5, np.e, np.e**2, np.e**4):
                    assert tilt.closed_tail(r, t) <= 1.0 / r + 1e-15
