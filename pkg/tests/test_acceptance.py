"""The fourteen acceptance criteria at their stated tolerances and time limits.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from satolab.g_toolkit import (
    ExpPowerInverseG,
    ExpPowerLogH,
    ExpSqrtLogG,
    IteratedLogG,
    LogLogRatioG,
    build_g_from_tail,
    build_K_from_g,
    is_submultiplicative,
    q_for_power_log_h,
    young_pair,
)
from satolab.levy_core import (
    Custom,
    DirectionMeasure,
    LevyProfile,
    LogWeibull,
    Lognormal,
    ProcessSpec,
    Stable,
    StepKernel,
    StudentT,
    TailFn,
    levy_integral,
)
from satolab.limsup_lab import R_OR, predict_C, run_experiment
from satolab.sampler import sample_marginal, simulate_bessel_times, simulate_sequence
from satolab.tail_analysis import check_theorem_3_2, convolution_inequalities

from conftest import ACCEPTANCE_KEY

INF = math.inf


@pytest.fixture
def criterion(record_property):
    def report(n, ok, detail, elapsed, limit=None):
        in_time = limit is None or elapsed < limit
        passed = bool(ok) and in_time
        budget = "" if limit is None else f" / limit {limit:g} s"
        line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}  [{elapsed:.2f} s{budget}]"
        print(line)
        record_property(ACCEPTANCE_KEY, (n, line))
        assert passed, line

    return report


def stable(alpha):
    return ProcessSpec(1 / alpha, 1, Stable(alpha))


def test_01_stable_dichotomy(criterion):
    t0 = time.perf_counter()
    bad = []
    for alpha in (0.7, 1.0, 1.5):
        for eps, want in ((0.5, 0.0), (0.0, INF), (-0.5, INF)):
            p = predict_C(stable(alpha), IteratedLogG(1, alpha, eps))
            if not (p.C == want and p.rule == R_OR and p.route == "analytic"):
                bad.append((alpha, eps, p.C, p.rule))
    criterion(1, not bad, f"9 (alpha, eps) cases, mismatches {bad}", time.perf_counter() - t0, 1.0)


def test_02_lognormal_normal_law(criterion):
    # normalizer exp(sqrt(2 a log x)) with a = 1, 1 + eps, 1 - eps and eps = 0.2
    t0 = time.perf_counter()
    spec = ProcessSpec(1.0, 1, Lognormal())
    got = [predict_C(spec, ExpSqrtLogG(a)).C for a in (1.0, 1.2, 0.8)]
    criterion(2, got == [1.0, 0.0, INF], f"C = {got} (want [1, 0, inf])", time.perf_counter() - t0, 1.0)


def test_03_student_t_dichotomy(criterion):
    t0 = time.perf_counter()
    got = {}
    for m in (1.0, 3.0):
        spec = ProcessSpec(1.0, 1, StudentT(m))
        got[m] = (predict_C(spec, IteratedLogG(1, m, 0.5)).C, predict_C(spec, IteratedLogG(1, m, 0.0)).C)
    ok = all(v == (0.0, INF) for v in got.values())
    criterion(3, ok, f"(C at eps=0.5, C at eps=0) = {got}", time.perf_counter() - t0, 1.0)


def test_04_truncated_kernel(criterion):
    t0 = time.perf_counter()
    prof = LevyProfile(DirectionMeasure.positive_1d(), StepKernel.from_values([5.0], [1.0, 0.0]))
    C = predict_C(ProcessSpec(1.0, 1, Custom(prof)), LogLogRatioG()).C
    criterion(4, C == 5.0, f"C = {C} (want 5)", time.perf_counter() - t0)


def test_05_series_vs_exact_sampler(criterion):
    t0 = time.perf_counter()
    ks = {}
    for alpha in (0.5, 1.0, 1.5):
        spec = stable(alpha)
        exact = sample_marginal(spec, 100, 100_000, route="exact")[:, 0]
        series = sample_marginal(spec, 200, 100_000, route="series")[:, 0]
        ks[alpha] = round(float(stats.ks_2samp(exact, series).statistic), 5)
    ok = all(v < 0.02 for v in ks.values())
    criterion(5, ok, f"KS by alpha {ks} (< 0.02)", time.perf_counter() - t0, 60.0)


def test_06_selfsimilar_sequence(criterion):
    t0 = time.perf_counter()
    s = simulate_sequence(stable(1.0), 6, 10, paths=10_000)
    y = s.normalized()[:, :, 0]
    ks = float(stats.ks_2samp(y[:, 10], y[:, 0]).statistic)
    criterion(6, ks < 0.02, f"KS(Y(10)/e^10, Y(0)) = {ks:.4f} (< 0.02)", time.perf_counter() - t0, 60.0)


def test_07_g_from_exponential_tail(criterion):
    t0 = time.perf_counter()
    g = build_g_from_tail(TailFn.from_family(LogWeibull(1.0, 1.0, 0.0), r_min=1e-2, r_max=1e3))
    rep = g.report
    ok = rep["divergence_proxy"] and rep["convergence_proxy"]
    detail = (f"partial sum {rep['divergence_partial_sum']:.6g} (> 1e3), "
              f"last 2g increment {rep['convergence_last_increment_2g']:.3g} (< 1e-9)")
    criterion(7, ok, detail, time.perf_counter() - t0, 10.0)


def test_08_K_from_exp_sqrt(criterion):
    # g^{-1}(x) = exp(sqrt x); clock step H = 0.25 keeps the divergent sum inside float range
    t0 = time.perf_counter()
    built = build_K_from_g(ExpPowerInverseG(1.0, 0.5), 0.25)
    rep = built.report
    k = built.profile.kernels[0]
    r = np.geomspace(1e-3, float(built.x[-1]), 2000)
    monotone = bool(np.all(np.diff(k(r)) <= 0))
    integrable = math.isfinite(levy_integral(built.profile))
    ok = monotone and integrable and rep["divergence_proxy"] and rep["convergence_proxy"]
    detail = (f"monotone {monotone}, integrable {integrable}, divergence proxy {rep['divergence_proxy']}, "
              f"convergence proxy {rep['convergence_proxy']}")
    criterion(8, ok, detail, time.perf_counter() - t0, 10.0)


def test_09_submultiplicative_table(criterion):
    t0 = time.perf_counter()
    table = {(0.5, 1): "Yes", (1, 0): "Yes", (1, -1): "Yes", (1, 1): "No", (1.5, 0): "No", (2, 0): "No"}
    bad = []
    for (a, b), want in table.items():
        h = ExpPowerLogH(1.0, a, b)
        an = is_submultiplicative(h, route="analytic").verdict
        nu = is_submultiplicative(h, route="numeric", budget=100_000).verdict
        if an != want or nu != want:
            bad.append(((a, b), an, nu))
    criterion(9, not bad, f"6 (alpha, beta) cases both routes, mismatches {bad}", time.perf_counter() - t0)


def test_10_young_conjugate_asymptotics(criterion):
    t0 = time.perf_counter()
    y = 1e8
    a, b = 2.0, 1.0
    got1 = young_pair(q_for_power_log_h(a, b)).f_inv(y)
    ref1 = a ** (-(b - a) / a) * (a - 1) ** (-(a - 1) / a) * y ** 0.5 * math.log(y) ** 0.5
    got2 = young_pair(q_for_power_log_h(1.0, 2.0)).f_inv(y)
    ref2 = math.log(y) ** 2
    r1, r2 = got1 / ref1, got2 / ref2
    ok = abs(r1 - 1) < 0.05 and abs(r2 - 1) < 0.05
    detail = f"f^(-1)(1e8)/asymptote = {r1:.4f} for x^2 log x, {r2:.4f} for x (log x)^2 (within 5%)"
    criterion(10, ok, detail, time.perf_counter() - t0, 10.0)


def test_11_convolution_inequalities(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    cauchy = convolution_inequalities(rng.standard_cauchy(100_000), rng.standard_cauchy(100_000))
    gauss = convolution_inequalities(rng.standard_normal(100_000), rng.standard_normal(100_000))
    ok = cauchy["all_pass"] and gauss["all_pass"] and cauchy["r"].size == gauss["r"].size == 50
    detail = f"Cauchy pair {cauchy['all_pass']}, Gaussian pair {gauss['all_pass']} at 50 points, 3 s.e."
    criterion(11, ok, detail, time.perf_counter() - t0, 60.0)


def test_12_tail_equivalence(criterion):
    t0 = time.perf_counter()
    out = check_theorem_3_2(stable(1.0), rng=12)
    ranges = {k: [round(v[0], 4), round(v[1], 4)] for k, v in out["ratio_ranges"].items()}
    ok = not out["violation"] and all(1 / 50 <= lo and hi <= 50 for lo, hi in ranges.values())
    criterion(12, ok, f"ratio ranges {ranges} within [1/50, 50]", time.perf_counter() - t0, 120.0)


def _hit_survival_exact(t, terms=50):
    # P(T_1 > t) for 3-d BM from 0: sum_n 2 (-1)^(n+1) exp(-n^2 pi^2 t / 2)
    n = np.arange(1, terms + 1)
    return float(np.sum(2 * (-1.0) ** (n + 1) * np.exp(-(n**2) * math.pi**2 * t / 2)))


def test_13_bessel_selfsimilarity(criterion):
    t0 = time.perf_counter()
    bt = simulate_bessel_times(3, "Hit", [0.5, 1.0], 13, dt=1e-4, paths=10_000)
    ks = float(stats.ks_2samp(bt.times[:, 1], 4 * bt.times[:, 0]).statistic)
    # survival at t = 1.5 has probability about 1e-3: 1e5 paths, walk stopped just past t
    t = 1.5
    tail = simulate_bessel_times(3, "Hit", [1.0], 14, dt=1e-4, paths=100_000, t_cap=1.6)
    p = float(np.mean(tail.times[:, 0] > t))
    rate = -math.log(p) / t
    target = math.pi**2 / 2
    oracle = -math.log(_hit_survival_exact(t)) / t
    ok = ks < 0.03 and abs(rate / target - 1) < 0.15
    detail = (f"KS(T_1, 4 T_0.5) = {ks:.4f} (< 0.03); rate {rate:.3f} vs pi^2/2 = {target:.3f} "
              f"(ratio {rate / target:.3f}, series value {oracle:.3f})")
    criterion(13, ok, detail, time.perf_counter() - t0, 600.0)


def test_14_trend_experiments(criterion):
    t0 = time.perf_counter()
    spec = stable(1.0)
    sample = simulate_sequence(spec, 14, 60, paths=200)
    up = run_experiment(spec, IteratedLogG(1, 1.0, -0.5), 60, 200, sample=sample)
    down = run_experiment(spec, IteratedLogG(1, 1.0, 1.0), 60, 200, sample=sample)
    med = up.medians
    increasing = bool(np.all(np.diff(med) > 0))
    ok = increasing and down.record_fraction < 0.2
    detail = (f"eps=-0.5 medians {np.round(med, 4).tolist()} strictly increasing {increasing}; "
              f"eps=1 record fraction {down.record_fraction:.3f} (< 0.2)")
    criterion(14, ok, detail, time.perf_counter() - t0, 300.0)
