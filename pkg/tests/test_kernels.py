import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import oracles
from dppstein.errors import InvalidKernelError
from dppstein.kernels import (
    LaguerreGaussianSpec,
    covariance_D,
    fit_decay_envelope,
    kernel_value,
    laguerre,
    max_intensity_alpha,
    pair_correlation,
    spectral_density,
    sufficient_variance_condition,
)
from dppstein.statistics import LocalStatistic


def closed_form_spectral(spec, q):
    """Closed-form transform of the Laguerre-Gaussian kernel; test oracle only."""
    m, d, a, rho = spec.m, spec.d, spec.alpha, spec.rho
    u = m * math.pi**2 * a**2 * q**2
    series = sum(u**k / math.factorial(k) for k in range(m))
    return rho * (m * math.pi * a**2) ** (d / 2) / spec.normalizer * math.exp(-u) * series


class TestLaguerre:
    @pytest.mark.parametrize("s,x", [(0.0, 0.0), (1.5, 3.2), (-1.2, 9.0)])
    def test_degree_zero_is_one(self, s, x):
        assert laguerre(0, s, x) == 1.0

    def test_degree_one(self):
        assert laguerre(1, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_direct_sum_example(self):
        ref = float(oracles.laguerre_sum(5, 0.5, 1.3))
        assert laguerre(5, 0.5, 1.3) == pytest.approx(ref, rel=1e-9)

    def test_vectorized(self):
        x = np.linspace(0, 4, 7)
        vals = laguerre(3, 0.5, x)
        assert vals.shape == x.shape
        for xi, v in zip(x, vals):
            assert v == pytest.approx(float(oracles.laguerre_sum(3, 0.5, xi)), rel=1e-12, abs=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(0, 10), s=st.floats(-0.9, 5), x=st.floats(0, 10))
    def test_recurrence_matches_direct_sum(self, n, s, x):
        ref = float(oracles.laguerre_sum(n, s, x))
        assert laguerre(n, s, x) == pytest.approx(ref, rel=1e-9, abs=1e-11)


class TestKernelValue:
    def test_origin_equals_rho(self):
        for m, d in [(1, 1), (2, 2), (3, 3)]:
            spec = LaguerreGaussianSpec(m=m, alpha=0.2, rho=3.0, d=d)
            assert kernel_value(spec, np.zeros(d)) == pytest.approx(3.0, rel=1e-14)

    def test_gaussian_case(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=2.0, d=2)
        z = np.array([0.1, -0.25])
        assert kernel_value(spec, z) == pytest.approx(2.0 * math.exp(-(z @ z) / 0.09), rel=1e-14)

    def test_high_precision_example(self):
        spec = LaguerreGaussianSpec(m=2, alpha=1.0, rho=1.0, d=2)
        ref = float(oracles.kernel(2, 1, 1, 2, (1, 0)))
        assert kernel_value(spec, [1.0, 0.0]) == pytest.approx(ref, rel=1e-12)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(3)
        spec = LaguerreGaussianSpec(m=3, alpha=0.4, rho=1.0, d=3)
        z = rng.normal(size=3) * 0.3
        base = kernel_value(spec, z)
        for _ in range(50):
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            assert kernel_value(spec, q @ z) == pytest.approx(base, rel=1e-12, abs=1e-15)

    def test_wrong_dimension(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=1.0, d=2)
        with pytest.raises(ValueError):
            kernel_value(spec, [0.0, 0.0, 0.0])

    @pytest.mark.parametrize("kw", [dict(m=0), dict(alpha=0.0), dict(rho=-1.0), dict(d=0)])
    def test_invalid_fields(self, kw):
        base = dict(m=1, alpha=0.3, rho=1.0, d=2)
        base.update(kw)
        with pytest.raises(ValueError):
            LaguerreGaussianSpec(**base)


class TestExistence:
    def test_examples(self):
        assert max_intensity_alpha(1, 1, 1) == pytest.approx(0.5641896, abs=1e-7)
        assert max_intensity_alpha(1, 4, 2) == pytest.approx(0.2820948, abs=1e-7)

    @given(c=st.floats(0.01, 100), m=st.integers(1, 5), d=st.integers(1, 3))
    def test_scaling_law(self, c, m, d):
        assert max_intensity_alpha(m, 2.0 * c, d) == pytest.approx(max_intensity_alpha(m, 2.0, d) * c ** (-1 / d), rel=1e-12)

    def test_flags(self):
        amax = max_intensity_alpha(2, 1.0, 2)
        at = LaguerreGaussianSpec(m=2, alpha=amax, rho=1.0, d=2)
        assert at.valid and not at.strictly_valid
        above = LaguerreGaussianSpec(m=2, alpha=amax * 1.01, rho=1.0, d=2)
        assert not above.valid
        with pytest.raises(InvalidKernelError, match="alpha_max"):
            above.require_valid()


class TestCovariance:
    def test_diagonal(self):
        spec = LaguerreGaussianSpec(m=2, alpha=0.3, rho=2.0, d=2)
        assert covariance_D(spec, [0.4, 0.4], [0.4, 0.4]) == pytest.approx(-4.0)

    def test_nonpositive(self):
        rng = np.random.default_rng(0)
        spec = LaguerreGaussianSpec(m=3, alpha=0.3, rho=1.0, d=2)
        vals = covariance_D(spec, rng.uniform(0, 2, (500, 2)), rng.uniform(0, 2, (500, 2)))
        assert np.all(vals <= 0)

    def test_gaussian_closed_form(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.2, rho=3.0, d=1)
        for r in [0.1, 0.5, 1.0]:
            assert covariance_D(spec, [r], [0.0]) == pytest.approx(-9.0 * math.exp(-2 * r**2 / 0.04), rel=1e-12)

    def test_pair_correlation(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.2, rho=3.0, d=2)
        assert pair_correlation(spec, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert pair_correlation(spec, 5.0) == pytest.approx(1.0)


class TestEnvelope:
    @pytest.mark.parametrize("alpha,rho,lam", [(0.15, 10.0, 1.0), (0.3, 1.0, 2.0), (0.5, 1.0, 0.5)])
    def test_gaussian_closed_form(self, alpha, rho, lam):
        spec = LaguerreGaussianSpec(m=1, alpha=alpha, rho=rho, d=2)
        env = fit_decay_envelope(spec, lam)
        assert env.kappa == pytest.approx(rho**2 * math.exp(lam**2 * alpha**2 / 8), rel=1e-8)
        assert env.lam == lam

    def test_small_lambda_limit(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=2.0, d=1)
        assert fit_decay_envelope(spec, 1e-6).kappa == pytest.approx(4.0, rel=1e-9)

    @pytest.mark.parametrize("m,d", [(1, 1), (2, 2), (3, 1), (4, 3)])
    def test_certification_grid(self, m, d):
        spec = LaguerreGaussianSpec(m=m, alpha=0.25, rho=1.0, d=d)
        env = fit_decay_envelope(spec, 1.5)
        r = np.linspace(0, 20 * spec.alpha, 200)
        fine = np.linspace(0, 25 * spec.alpha, 20001)
        c2 = spec.radial(fine) ** 2
        majorant = np.maximum.accumulate(c2[::-1])[::-1]
        E = np.interp(r, fine, majorant)
        assert np.all(E <= env(r) + 1e-12)

    def test_rejects_bad_lambda(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=1.0, d=1)
        with pytest.raises(ValueError):
            fit_decay_envelope(spec, 0.0)


class TestSpectral:
    def test_gaussian_at_origin(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.15, rho=10.0, d=2)
        sd = spectral_density(spec)
        assert sd.mode == "closed-form"
        assert sd(np.zeros(2)) == pytest.approx(10 * math.pi * 0.15**2, rel=1e-14)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_equality_case_peaks_at_one(self, d):
        spec = LaguerreGaussianSpec(m=1, alpha=max_intensity_alpha(1, 2.0, d), rho=2.0, d=d)
        assert spectral_density(spec)(np.zeros(d)) == pytest.approx(1.0, rel=1e-13)

    @pytest.mark.parametrize("m,d", [(2, 1), (2, 2), (3, 2), (3, 3)])
    def test_numeric_against_closed_form(self, m, d):
        spec = LaguerreGaussianSpec(m=m, alpha=0.8 * max_intensity_alpha(m, 1.0, d), rho=1.0, d=d)
        sd = spectral_density(spec)
        assert sd.mode == "numeric-radial-transform"
        for q in [0.0, 0.3, 1.0, 2.0]:
            ref = closed_form_spectral(spec, q)
            assert float(sd.radial(np.array(q))) == pytest.approx(ref, rel=1e-5, abs=1e-9)

    @pytest.mark.parametrize("m,d", [(1, 2), (2, 2), (3, 1)])
    def test_symmetry_and_mass(self, m, d):
        spec = LaguerreGaussianSpec(m=m, alpha=0.7 * max_intensity_alpha(m, 1.5, d), rho=1.5, d=d)
        sd = spectral_density(spec)
        xi = np.random.default_rng(1).normal(size=(20, d))
        np.testing.assert_array_equal(sd(xi), sd(-xi))
        assert sd.total_mass() == pytest.approx(1.5, rel=1e-3)

    @pytest.mark.parametrize("m,d", [(1, 1), (2, 2), (3, 3)])
    def test_strictly_valid_below_one(self, m, d):
        spec = LaguerreGaussianSpec(m=m, alpha=0.95 * max_intensity_alpha(m, 1.0, d), rho=1.0, d=d)
        assert spectral_density(spec).sup < 1.0

    def test_invalid_kernel_rejected(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.6, rho=1.0, d=2)
        with pytest.raises(InvalidKernelError):
            spectral_density(spec)


class TestVarianceCondition:
    def test_count_gives_rho(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=2.5, d=2)
        vc = sufficient_variance_condition(spec, LocalStatistic("count", tau=0.5), 5.0)
        assert vc.lower_estimate == pytest.approx(2.5, rel=1e-12)
        assert vc.satisfied

    def test_pair_indicator_radial_oracle(self):
        rho, alpha, r = 1.0, 0.3, 0.4
        spec = LaguerreGaussianSpec(m=1, alpha=alpha, rho=rho, d=2)
        stat = LocalStatistic("pair_indicator", tau=r, r=r)
        n = 1e6  # overlap factor ~1
        vc = sufficient_variance_condition(spec, stat, n)
        ref, _ = integrate.quad(lambda t: 2 * math.pi * t * rho**2 * (1 - math.exp(-2 * t**2 / alpha**2)), 0, r)
        # the disc boundary is not aligned with the tensor rule, so allow its error bound
        assert abs(vc.lower_estimate - ref) <= max(vc.error_bound * 10, 2e-3 * ref)
        assert vc.satisfied

    def test_zero_statistic(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.3, rho=1.0, d=1)
        vc = sufficient_variance_condition(spec, LocalStatistic("zero", tau=0.5), 10.0)
        assert vc.lower_estimate == 0.0 and not vc.satisfied

    def test_requires_strict_validity(self):
        amax = max_intensity_alpha(1, 1.0, 1)
        spec = LaguerreGaussianSpec(m=1, alpha=amax, rho=1.0, d=1)
        with pytest.raises(InvalidKernelError):
            sufficient_variance_condition(spec, LocalStatistic("count", tau=0.5), 10.0)
