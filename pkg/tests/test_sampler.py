import math

import numpy as np
import pytest

from dppstein.errors import InvalidKernelError, TruncationError
from dppstein.kernels import LaguerreGaussianSpec
from dppstein.sampler import (
    PointPattern,
    SeedSpec,
    Window,
    binned_theoretical_pcf,
    count_in_box,
    empirical_intensity,
    empirical_pcf,
    sample_dpp,
    sample_many,
    sample_projection_dpp,
    spectral_truncation,
)

SPEC = LaguerreGaussianSpec(m=1, alpha=0.15, rho=10.0, d=2)


class TestWindowAndPattern:
    def test_points_outside_rejected(self):
        with pytest.raises(ValueError):
            PointPattern(Window(1, 2.0), np.array([[2.5]]))

    def test_bad_window(self):
        with pytest.raises(ValueError):
            Window(2, 0.0)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            SeedSpec(-1)
        with pytest.raises(ValueError):
            SeedSpec(2**64)

    def test_streams_differ(self):
        a = SeedSpec(5, 0).generator().uniform(size=4)
        b = SeedSpec(5, 1).generator().uniform(size=4)
        c = SeedSpec(6, 0).generator().uniform(size=4)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestTruncation:
    def test_tail_below_tolerance(self):
        tr = spectral_truncation(SPEC, Window(2, 3.0))
        assert tr.tail_fraction < 1e-3
        assert tr.expected_count == pytest.approx(90.0, rel=2e-3)
        smaller = spectral_truncation(SPEC, Window(2, 3.0), tol=1e-1)
        assert smaller.k_max < tr.k_max

    def test_cap(self):
        with pytest.raises(TruncationError):
            spectral_truncation(SPEC, Window(2, 3.0), kmax_cap=3)

    def test_invalid_kernel(self):
        with pytest.raises(InvalidKernelError):
            spectral_truncation(LaguerreGaussianSpec(m=1, alpha=0.2, rho=10.0, d=2), Window(2, 3.0))

    def test_eigenvalues_in_unit_interval(self):
        spec = LaguerreGaussianSpec(m=2, alpha=0.9 * LaguerreGaussianSpec(m=2, alpha=1, rho=5, d=1).alpha_max, rho=5, d=1)
        tr = spectral_truncation(spec, Window(1, 4.0))
        assert np.all((tr.eigenvalues >= 0) & (tr.eigenvalues <= 1))


class TestSampling:
    def test_determinism(self):
        w = Window(2, 2.0)
        a = sample_dpp(SPEC, w, SeedSpec(42, 3))
        b = sample_dpp(SPEC, w, SeedSpec(42, 3))
        assert a.points.tobytes() == b.points.tobytes()

    def test_parallel_matches_serial(self):
        w = Window(1, 6.0)
        spec = LaguerreGaussianSpec(m=1, alpha=0.2, rho=2.0, d=1)
        serial = sample_many(spec, w, 9, range(6))
        parallel = sample_many(spec, w, 9, range(6), workers=2)
        for s, p in zip(serial, parallel):
            assert s.points.tobytes() == p.points.tobytes()

    def test_vanishing_intensity(self):
        spec = LaguerreGaussianSpec(m=1, alpha=0.15, rho=1e-8, d=2)
        pats = sample_many(spec, Window(2, 3.0), 1, range(100))
        assert np.mean([len(p) for p in pats]) < 1e-3

    def test_projection_sample_size(self):
        freqs = np.array([[-1], [0], [2], [5]])
        pts = sample_projection_dpp(freqs, 3.0, np.random.default_rng(0))
        assert pts.shape == (4, 1)
        assert np.all((pts >= 0) & (pts <= 3.0))

    def test_simplicity_and_underdispersion(self):
        w = Window(2, 2.0)
        tr = spectral_truncation(SPEC, w)
        pats = sample_many(SPEC, w, 2024, range(500), tr)
        assert all(p.is_simple() for p in pats)
        counts = np.array([len(p) for p in pats], dtype=float)
        R = len(counts)
        mean, var = counts.mean(), counts.var(ddof=1)
        # variance standard error from the fourth central moment
        dev = counts - mean
        se_var = math.sqrt(max(np.mean(dev**4) - var**2, 0.0) / R)
        assert var <= mean + 3 * (se_var + counts.std(ddof=1) / math.sqrt(R))
        assert abs(mean - tr.expected_count) <= 3 * counts.std(ddof=1) / math.sqrt(R)


class TestIntensity:
    def test_constant_counts(self):
        w = Window(2, 2.0)
        pats = [PointPattern(w, np.full((3, 2), 0.5) + 0.1 * np.arange(3)[:, None]) for _ in range(5)]
        rho, se = empirical_intensity(pats)
        assert rho == 0.75 and se == 0.0

    def test_volume_scaling(self):
        pts = np.array([[0.5, 0.5], [1.0, 1.5]])
        small = [PointPattern(Window(2, 2.0), pts)] * 3
        big = [PointPattern(Window(2, 2.0 * math.sqrt(2)), pts)] * 3
        assert empirical_intensity(big)[0] == pytest.approx(empirical_intensity(small)[0] / 2)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            empirical_intensity([])

    def test_count_in_box_half_open(self):
        p = PointPattern(Window(1, 3.0), np.array([[1.0], [2.0], [2.5]]))
        assert count_in_box(p, ([1.0], [2.0])) == 1


class TestPCF:
    def test_single_point_patterns(self):
        w = Window(2, 2.0)
        est = empirical_pcf([PointPattern(w, np.array([[1.0, 1.0]]))] * 3, [0.0, 0.1, 0.2])
        assert np.all(np.isnan(est.g_hat)) and np.all(est.n_used == 0)

    @pytest.mark.parametrize("edges", [[0.0, 0.1], [0.0, 0.2, 0.1], [0.0, 0.5, 10.0]])
    def test_bad_bins(self, edges):
        w = Window(2, 2.0)
        with pytest.raises(ValueError):
            empirical_pcf([PointPattern(w, np.array([[1.0, 1.0], [0.5, 0.5]]))], edges)

    def test_binned_theory(self):
        edges = np.array([0.0, 0.05, 0.5, 2.0])
        g = binned_theoretical_pcf(SPEC, edges)
        x = 2 * 0.05**2 / 0.15**2  # d = 2: shell average of 1 - exp(-2 r^2 / alpha^2) over [0, b]
        assert g[0] == pytest.approx(1 - (1 - math.exp(-x)) / x, rel=1e-10)
        assert g[-1] == pytest.approx(1.0, abs=1e-3)
        assert np.all(np.diff(g) > 0)

    def test_repulsion_and_large_distance(self):
        w = Window(2, 3.0)
        tr = spectral_truncation(SPEC, w)
        pats = sample_many(SPEC, w, 77, range(150), tr)
        edges = np.array([0.0, 0.05, 0.4, 0.5])
        est = empirical_pcf(pats, edges)
        theory = binned_theoretical_pcf(SPEC, edges)
        assert est.g_hat[0] < 1
        assert abs(est.g_hat[0] - theory[0]) <= 3 * est.stderr[0] + 1e-12
        assert abs(est.g_hat[-1] - 1.0) <= 3 * est.stderr[-1]
