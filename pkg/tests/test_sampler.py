import math

import numpy as np
import pytest
from scipy import stats

from satolab.errors import InvalidCutoff, RouteUnavailable
from satolab.levy_core import (
    Custom,
    DirectionMeasure,
    LevyProfile,
    Lognormal,
    PowerKernel,
    ProcessSpec,
    Stable,
    Weibull,
    eta_l_tail,
    gaussian_spec,
)
from satolab.sampler import (
    IncrementLaw,
    PathSample,
    increments,
    sample_marginal,
    sample_rho_l,
    series_depth,
    simulate_bessel_times,
    simulate_sequence,
)

CAUCHY1 = ProcessSpec(1.0, 1, Stable(1.0, scale=1.0))


def power_custom(alpha=1.5, H=None):
    prof = LevyProfile(DirectionMeasure.symmetric_1d(), PowerKernel(alpha))
    return ProcessSpec(H or 1 / alpha, 1, Custom(prof))


class TestRho:
    def test_stable_rho_is_scaled_cauchy(self):
        # the process version of Cauchy(scale 1) has kernel 2/pi r^{-1}: X(1) ~ Cauchy(scale 1)
        x = sample_rho_l(IncrementLaw.default(CAUCHY1), 7, 40_000)[:, 0]
        ks = stats.kstest(x, stats.cauchy(scale=1 - math.exp(-1)).cdf).statistic
        assert ks < 0.012

    def test_gaussian_rho_covariance(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        spec = gaussian_spec(A, H=0.5)
        law = IncrementLaw.default(spec, l=2)
        x = sample_rho_l(law, 3, 100_000)
        target = (1 - math.exp(-2 * 2 * 0.5)) * A
        assert np.allclose(np.cov(x.T), target, rtol=0.03, atol=0.01)
        assert np.allclose(x.mean(axis=0), 0.0, atol=0.02)

    def test_empty(self):
        assert sample_rho_l(IncrementLaw.default(CAUCHY1), 0, 0).shape == (0, 1)

    def test_exact_route_only_where_available(self):
        with pytest.raises(RouteUnavailable):
            IncrementLaw(ProcessSpec(1.0, 1, Lognormal()), 1, "Exact")

    def test_cutoff_budget_guard(self):
        law = IncrementLaw(power_custom(1.5), 1, "CompoundPoissonPlusGaussian", epsilon=1e-9)
        with pytest.raises(InvalidCutoff):
            sample_rho_l(law, 0, 10)

    def test_compound_poisson_tail_fidelity(self):
        spec = power_custom(1.5)
        law = IncrementLaw.default(spec, 1, epsilon=0.05)
        x = np.abs(sample_rho_l(law, 11, 100_000)[:, 0])
        top = x.max()
        r = np.geomspace(top / 100, top / 3, 12)
        emp = np.array([(x > ri).mean() for ri in r])
        keep = emp * x.size >= 20  # empirical tail needs a handful of exceedances to be meaningful
        ratio = emp[keep] / eta_l_tail(spec.profile(), 1, spec.H, r[keep])
        assert keep.sum() >= 6
        assert np.all((ratio > 0.5) & (ratio < 2.0))

    def test_compound_poisson_matches_exact_stable(self):
        law_cp = IncrementLaw.default(CAUCHY1, 1, epsilon=0.02)
        a = sample_rho_l(law_cp, 1, 30_000)[:, 0]
        b = sample_rho_l(IncrementLaw.default(CAUCHY1), 2, 30_000)[:, 0]
        assert stats.ks_2samp(a, b).statistic < 0.02


class TestMarginal:
    def test_weibull_exponential_mean(self):
        x = sample_marginal(ProcessSpec(1.0, 1, Weibull(1.0)), 5, 100_000)[:, 0]
        assert abs(x.mean() - 1.0) < 3 * x.std() / math.sqrt(x.size)

    def test_lognormal_log_normality(self):
        x = sample_marginal(ProcessSpec(1.0, 1, Lognormal()), 6, 100_000)[:, 0]
        assert stats.kstest(np.log(x), "norm").pvalue > 0.01

    def test_series_depth_rule(self):
        assert series_depth(1.0, 1.0, 1e-3) == math.ceil(math.log(1e3))
        assert series_depth(1.0, 1e-4, 1e-3) == 0

    def test_series_tol_doubling_stable(self):
        spec = ProcessSpec(1 / 1.5, 1, Stable(1.5))
        ref = sample_marginal(spec, 0, 40_000, route="exact")[:, 0]
        k = [stats.ks_2samp(ref, sample_marginal(spec, 1, 40_000, tol, route="series")[:, 0]).statistic
             for tol in (1e-3, 2e-3)]
        assert abs(k[0] - k[1]) < 0.005

    def test_series_unavailable_for_exact_only(self):
        with pytest.raises(RouteUnavailable):
            sample_marginal(power_custom(), 0, 10, route="exact")


class TestSequence:
    def test_zero_steps(self):
        s = simulate_sequence(CAUCHY1, 4, 0, paths=5)
        assert s.values.shape == (5, 1, 1)
        y0 = sample_marginal(CAUCHY1, 4, 5)
        assert s.paths == 5 and np.all(np.isfinite(y0))

    def test_independent_increments(self):
        paths = 4000
        s = simulate_sequence(ProcessSpec(1.0, 1, Weibull(1.0)), 9, 10, paths=paths)
        xi = increments(s)[:, :, 0]
        corr = np.corrcoef(xi[:, 4], xi[:, 8])[0, 1]
        assert abs(corr) < 3 / math.sqrt(paths)

    def test_increment_exchangeability(self):
        s = simulate_sequence(CAUCHY1, 12, 6, paths=10_000)
        xi = increments(s)[:, :, 0]
        for a, b in ((0, 3), (1, 5), (2, 4)):
            assert stats.ks_2samp(xi[:, a], xi[:, b]).statistic < 0.03

    def test_thread_count_does_not_change_output(self):
        a = simulate_sequence(CAUCHY1, 21, 5, paths=5000, threads=1, batch_size=1000)
        b = simulate_sequence(CAUCHY1, 21, 5, paths=5000, threads=4, batch_size=1000)
        assert np.array_equal(a.values, b.values)

    def test_seed_reproducible(self):
        a = simulate_sequence(CAUCHY1, 8, 4, paths=50)
        b = simulate_sequence(CAUCHY1, 8, 4, paths=50)
        c = simulate_sequence(CAUCHY1, 9, 4, paths=50)
        assert np.array_equal(a.values, b.values) and not np.array_equal(a.values, c.values)

    def test_negative_N(self):
        with pytest.raises(ValueError):
            simulate_sequence(CAUCHY1, 0, -1)

    def test_columnar_round_trip(self, tmp_path):
        s = simulate_sequence(CAUCHY1, 3, 4, paths=3)
        for name in ("p.txt", "p.bin"):
            path = tmp_path / name
            if name.endswith(".txt"):
                s.write(path)
            else:
                from satolab import io

                io.write_columnar(path, s.to_columns())
            back = PathSample.read(path, s.H, s.l, s.paths, 1)
            assert np.array_equal(back.values, s.values)

    def test_compound_poisson_sequence_selfsimilar(self):
        spec = power_custom(1.5)
        s = simulate_sequence(spec, 2, 3, paths=4000, epsilon=0.05)
        y = s.normalized()[:, :, 0]
        assert stats.ks_2samp(y[:, 0], y[:, 3]).statistic < 0.05


class TestBessel:
    def test_hitting_times_increase(self):
        bt = simulate_bessel_times(3, "Hit", [0.5, 1.0, 2.0], 1, dt=1e-3, paths=200)
        assert np.all(np.diff(bt.times, axis=1) >= 0)

    def test_last_exit_needs_transience(self):
        with pytest.raises(ValueError):
            simulate_bessel_times(2, "LastExit", [1.0], 0)

    def test_last_exit_after_hit(self):
        hit = simulate_bessel_times(3, "Hit", [1.0], 5, dt=1e-3, paths=300)
        le = simulate_bessel_times(3, "LastExit", [1.0], 5, dt=1e-3, paths=300)
        assert np.median(le.times[:, 0]) > np.median(hit.times[:, 0])
        assert le.return_probability < 0.01

    def test_hit_mean_dimension_3(self):
        # E T_1 = 1/d for BM started at 0
        bt = simulate_bessel_times(3, "Hit", [1.0], 8, dt=1e-4, paths=4000)
        t = bt.times[:, 0]
        assert abs(t.mean() - 1 / 3) < 4 * t.std() / math.sqrt(t.size) + 0.01
