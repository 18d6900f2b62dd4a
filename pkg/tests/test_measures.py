import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outail import (
    MixtureDensity,
    QuadratureRule,
    SinePerturbationDensity,
    TiltDensity,
    beta_probe,
    constant_density,
    validate_normalization,
)
from outail.errors import DimensionMismatchError, NonFiniteValueError
from outail.numeric import FD_STEP, fd_gradient

RULE64 = QuadratureRule.gauss_hermite(1, 64)


def probe_grid(lo=-3.0, hi=3.0, step=0.25):
    return np.arange(lo, hi + 1e-9, step)


class TestNormalization:
    def test_tilt_exact(self):
        assert validate_normalization(TiltDensity([1.0]), RULE64) < 1e-12

    def test_constant_density_weight_sum(self):
        # f = 1: residual reduces to the weight-sum error
        assert validate_normalization(constant_density(1), RULE64) < 1e-14

    def test_mixture(self):
        # every component is a Gaussian relative density of mass exactly 1
        mix = MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
        assert validate_normalization(mix, RULE64) < 1e-10

    def test_sine(self):
        sine = SinePerturbationDensity(0.3, [2.0])
        assert validate_normalization(sine, RULE64) < 1e-10

    def test_2d(self):
        rule = QuadratureRule.gauss_hermite(2, 32)
        mix = MixtureDensity([0.3, 0.7], [[-1.0, 0.5], [1.0, -0.5]], 0.4)
        assert validate_normalization(mix, rule) < 1e-10

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            validate_normalization(TiltDensity([1.0, 0.0]), RULE64)


class TestBetaProbe:
    def test_tilt_flat(self):
        # linear log-density: zero Hessian everywhere
        assert abs(beta_probe(TiltDensity([2.0]), probe_grid())) < 1e-8

    def test_mixture_certificate_holds(self):
        mix = MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
        assert beta_probe(mix, probe_grid()) >= -1e-6

    def test_sine_certificate_holds(self):
        sine = SinePerturbationDensity(0.3, [2.0])
        assert beta_probe(sine, probe_grid(-4, 4, 0.1)) >= -1e-6

    def test_understated_beta_is_flagged(self):
        # single Gaussian component with spread 1/2 has constant log-Hessian
        # -id; claiming beta = 0 must produce a margin close to -1
        dishonest = MixtureDensity([1.0], [0.0], 0.5, beta=0.0)
        margin = beta_probe(dishonest, probe_grid())
        assert margin == pytest.approx(-1.0, abs=1e-5)

    def test_nonfinite_probe_rejected(self):
        with pytest.raises(NonFiniteValueError):
            beta_probe(TiltDensity([1.0]), [np.inf])


class TestGradients:
    @pytest.mark.parametrize("name", ["tilt", "mixture", "sine"])
    def test_grad_matches_finite_differences(self, name, rng):
        density = {
            "tilt": TiltDensity([1.3]),
            "mixture": MixtureDensity([0.4, 0.6], [-1.0, 1.5], 0.45),
            "sine": SinePerturbationDensity(0.4, [1.7]),
        }[name]
        x = rng.normal(size=(100, 1)) * 2.0
        grad = density.grad_log_f(x)
        fd = fd_gradient(density.log_f, x, h=FD_STEP)
        np.testing.assert_allclose(grad, fd, atol=5e-9, rtol=1e-7)

    def test_grad_2d(self, rng):
        mix = MixtureDensity([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.5]], 0.5)
        x = rng.normal(size=(50, 2))
        np.testing.assert_allclose(
            mix.grad_log_f(x), fd_gradient(mix.log_f, x), atol=1e-8, rtol=1e-6
        )

    def test_mixture_hessian_analytic_vs_fd(self, rng):
        from outail.numeric import fd_hessian

        mix = MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
        for x in rng.normal(size=(20, 1)) * 2:
            np.testing.assert_allclose(
                mix.hessian_log_f(x), fd_hessian(mix.log_f, x), atol=1e-6
            )


class TestTiltClosedForms:
    @given(
        alpha=st.floats(0.1, 3.0),
        x=st.floats(-4.0, 4.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_log_density_formula(self, alpha, x):
        tilt = TiltDensity([alpha])
        expected = alpha * x - alpha**2 / 2.0
        assert float(tilt.log_f(np.array([x]))) == pytest.approx(expected, rel=1e-12)

    def test_zero_tilt_is_constant_one(self):
        d = constant_density(1)
        xs = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(d.log_f(xs), 0.0, atol=0.0)
        assert d.closed_tail(2.0) == 0.0

    def test_ou_image_shrinks_tilt(self):
        tilt = TiltDensity([2.0])
        img = tilt.closed_ou(0.7)
        assert img.alpha == pytest.approx(2.0 * np.exp(-0.7), rel=1e-15)

    def test_beta_zero(self):
        assert TiltDensity([3.0]).beta == 0.0


class TestMixtureValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MixtureDensity([0.5, 0.6], [-1.0, 1.0], 0.5)

    def test_spread_bounds(self):
        for bad in (0.0, 1.0, 1.5, -0.2):
            with pytest.raises(ValueError):
                MixtureDensity([1.0], [0.0], bad)

    def test_probed_beta_bounded_by_asymptote(self):
        # the defect approaches 1/s - 1 from below, so the inflated probe
        # value must land within 10% above it
        mix = MixtureDensity([0.5, 0.5], [-1.0, 1.0], 0.5)
        assert 0.9 <= mix.beta <= 1.1 * (1.0 / 0.5 - 1.0) + 1e-12

    def test_strict_positivity(self, rng):
        mix = MixtureDensity([0.2, 0.8], [-2.0, 1.0], 0.3)
        assert np.isfinite(mix.log_f(rng.normal(size=(200, 1)) * 3)).all()


class TestSineFamily:
    def test_beta_is_exact(self):
        assert SinePerturbationDensity(0.5, [2.0]).beta == pytest.approx(2.0)
        assert SinePerturbationDensity(0.25, [1.0, 2.0]).beta == pytest.approx(1.25)

    def test_eps_zero_is_constant(self):
        flat = SinePerturbationDensity(0.0, [2.0])
        assert abs(flat.log_z) < 1e-14
        np.testing.assert_allclose(flat.log_f(np.linspace(-3, 3, 7)), 0.0, atol=1e-14)
