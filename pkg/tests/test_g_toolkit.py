import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from satolab.errors import HypothesisViolated, NotConstructible, QValidationFailed, SpecError
from satolab.g_toolkit import (
    ExpPowerInverseG,
    ExpPowerLogH,
    ExpSqrtLogG,
    ExponentialG,
    GFunction,
    IteratedLogG,
    PowerLogG,
    StepG,
    build_g_from_tail,
    build_K_from_g,
    conjugate_eval,
    g_inverse,
    is_submultiplicative,
    make_g,
    young_pair,
)
from satolab.levy_core import LogWeibull, PowerLog, Stretched, TailFn, levy_integral


class TestInverse:
    def test_identity(self):
        g = PowerLogG(1.0, 1.0, 0.0, 0.0)
        assert g_inverse(g, 3.7) == pytest.approx(3.7, rel=1e-12)

    def test_below_infimum(self):
        g = ExponentialG(1.0)  # g(0) = 1
        assert g_inverse(g, 0.5) == 0.0
        assert g_inverse(g, 1.0) == 0.0

    def test_step(self):
        g = StepG(np.arange(6.0), 2.0 ** np.arange(6))
        assert g_inverse(g, 3.0) == 2.0
        assert g_inverse(g, 4.0) == 2.0  # g < 4 on [0, 2)
        assert g_inverse(g, 4.5) == 3.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            g_inverse(ExponentialG(), -1.0)

    def test_closed_forms_match_bisection(self):
        from satolab.g_toolkit import numeric_inverse

        y = np.geomspace(2.0, 1e6, 25)
        for g in (IteratedLogG(1, 1.5, 0.3), PowerLogG(2.0, 0.5, 1.0), ExpSqrtLogG(1.0), ExponentialG(0.7)):
            assert np.allclose(g.inverse(y), numeric_inverse(g, y), rtol=1e-9)

    def test_class_G1_checks(self):
        for g in (IteratedLogG(2, 1.0, 0.0), ExpSqrtLogG(1.0), ExponentialG(1.0)):
            assert all(g.check().values())

    def test_registry_round_trip(self):
        for g in (IteratedLogG(2, 1.5, -0.5), PowerLogG(2.0, 0.5, 1.0), ExpPowerInverseG(1.0, 0.5)):
            back = GFunction.from_dict(g.to_dict())
            x = np.geomspace(1, 1e4, 9)
            assert np.array_equal(back(x), g(x))
        s = StepG(np.array([0.0, 1.5]), np.array([1.0, np.pi]))
        assert np.array_equal(GFunction.from_dict(s.to_dict()).y, s.y)

    def test_unknown_family(self):
        with pytest.raises(SpecError):
            make_g("nope")


class TestSubmultiplicative:
    @pytest.mark.parametrize("alpha,beta,yes", [(0.5, 1, True), (1, 0, True), (1, -1, True),
                                                (1, 1, False), (1.5, 0, False), (2, 0, False)])
    def test_analytic_table(self, alpha, beta, yes):
        v = is_submultiplicative(ExpPowerLogH(1.0, alpha, beta))
        assert v.verdict == ("Yes" if yes else "No")

    def test_sqrt_numeric(self):
        v = is_submultiplicative(ExpPowerLogH(1.0, 0.5, 0.0), route="numeric", budget=20_000)
        assert v.verdict == "Yes" and v.c == pytest.approx(1.0, abs=0.02)  # sup of the ratio is 1, at the origin

    def test_xlogx_numeric(self):
        v = is_submultiplicative(ExpPowerLogH(1.0, 1.0, 1.0), route="numeric", budget=20_000)
        assert v.verdict == "No" and v.witness is not None

    def test_constant_one(self):
        v = is_submultiplicative(lambda x: np.ones(np.shape(x)), budget=5000)
        assert v.verdict == "Yes" and v.c == pytest.approx(1.0)


class TestYoung:
    def test_identity_q(self):
        pair = young_pair(lambda t: np.asarray(t, float))
        h, f, hi, fi = conjugate_eval(pair, 8.0)
        assert h == pytest.approx(32.0, rel=1e-9)
        assert f == pytest.approx(32.0, rel=1e-9)
        assert hi == pytest.approx(4.0, rel=1e-9)  # sqrt(2 * 8)
        assert fi == pytest.approx(4.0, rel=1e-9)

    def test_young_inequality(self):
        pair = young_pair(lambda t: np.asarray(t, float) ** 1.5)
        for x in (0.5, 2.0, 7.0):
            for y in (0.3, 3.0, 20.0):
                assert pair.h(x) + pair.f(y) >= x * y * (1 - 1e-9)

    def test_f_identity_vs_quadrature(self):
        pair = young_pair(lambda t: np.asarray(t, float) ** 2)
        assert pair.f(9.0) == pytest.approx(pair.f_by_quadrature(9.0), rel=1e-6)
        assert pair.f(9.0) == pytest.approx(2 / 3 * 9.0**1.5, rel=1e-8)

    def test_validation(self):
        with pytest.raises(QValidationFailed):
            young_pair(lambda t: np.asarray(t, float) + 1.0)
        with pytest.raises(QValidationFailed):
            young_pair(lambda t: np.minimum(np.asarray(t, float), 1.0))

    def test_duality(self):
        # the pair built from q^{-1} has q as its inverse, so its f is the original h
        pair = young_pair(lambda t: np.asarray(t, float) ** 2, q_inv=lambda s: np.sqrt(np.asarray(s, float)))
        back = young_pair(lambda s: np.sqrt(np.asarray(s, float)), q_inv=lambda t: np.asarray(t, float) ** 2)
        for x in np.geomspace(1.0, 1e6, 7):
            assert back.f(x) == pytest.approx(pair.h(x), rel=1e-6)


class TestBuildG:
    def test_exponential_tail(self):
        g = build_g_from_tail(TailFn.from_family(LogWeibull(1.0, 1.0, 0.0), r_min=1e-2, r_max=1e3))
        rep = g.report
        assert rep["divergence_proxy"] and rep["convergence_proxy"]
        assert rep["divergence_partial_sum"] > 1e3 and rep["convergence_last_increment_2g"] < 1e-9
        # 2^{-n} e^{-y} >= e^{-2y} iff y >= n log 2
        n = np.arange(1, 40)
        assert np.allclose(g.y[1:40], n * math.log(2), rtol=1e-3)
        # class G_1 on the constructed grid: positive, nondecreasing, growing without bound
        assert np.all(g.y > 0) and np.all(np.diff(g.y) >= 0) and g.y[-1] > 100 * g.y[1]

    def test_step_products_in_band(self):
        f = TailFn.from_family(LogWeibull(1.0, 1.0, 0.0), r_min=1e-2, r_max=1e3)
        g = build_g_from_tail(f)
        dx = np.diff(g.x)
        prod = np.exp(f.log_value(g.y[:-1])) * dx
        assert np.all((prod >= 1) & (prod <= 2))

    def test_power_law_not_constructible(self):
        with pytest.raises(NotConstructible):
            build_g_from_tail(TailFn.from_family(PowerLog(1.0, 2.0, 0.0)))

    def test_lognormal_tail_gives_normal_law_normalizer(self):
        r = np.geomspace(1.5, 1e12, 400)
        lr = np.log(r)
        t = np.exp(-lr**2 / 2) / (math.sqrt(2 * math.pi) * lr)
        g = build_g_from_tail(TailFn("custom", r, t, Stretched(1 / math.sqrt(2 * math.pi), 0.5, 1.0)))
        x = np.geomspace(10, g.x[-1], 40)
        ratio = g(x) / np.exp(np.sqrt(2 * np.log(x)))
        assert np.all((ratio > 1 / 3) & (ratio < 3))


class TestBuildK:
    @pytest.fixture(scope="class")
    @classmethod
    def built(cls):
        return build_K_from_g(ExpPowerInverseG(1.0, 0.5), 0.25)

    def test_kernel_valid(self, built):
        k = built.profile.kernels[0]
        r = np.geomspace(1e-3, float(built.x[-1]), 500)
        assert np.all(np.diff(k(r)) <= 0)
        assert math.isfinite(levy_integral(built.profile))

    def test_step_values_are_tail_sums(self, built):
        # independent quadrature of C_n = int_{x_n}^{e^H x_n} (g^{-1}(x) + log x) dx/x for the first cells
        H = 0.25
        g = ExpPowerInverseG(1.0, 0.5)
        x = built.x
        C = [integrate.quad(lambda u: float(g.inverse(math.exp(u))) + u, math.log(a), math.log(a) + H)[0]
             for a in x[:12]]
        k = built.profile.kernels[0]
        for n in range(4):
            tail = sum(1 / c for c in C[n:])
            mid = x[n] * math.exp(H / 2)
            assert float(k(mid)) == pytest.approx(tail, rel=1e-6)

    def test_dichotomy_proxies(self, built):
        rep = built.report
        assert rep["divergence_proxy"] and rep["convergence_proxy"]
        assert rep["kernel_decreasing"] and rep["levy_integrable"]

    def test_power_inverse_violates_OR_hypothesis(self):
        with pytest.raises(HypothesisViolated):
            build_K_from_g(PowerLogG(1.0, 0.5, 0.0, 0.0), 1.0)  # g^{-1}(x) = x^2

    def test_exp_square_not_submultiplicative(self):
        with pytest.raises(HypothesisViolated):
            build_K_from_g(ExpPowerInverseG(1.0, 2.0), 1.0)


# properties

@settings(max_examples=25, deadline=None)
@given(x=st.floats(0.01, 1e6), fam=st.sampled_from([IteratedLogG(1, 1.0, 0.5), PowerLogG(1.0, 0.7, 0.0, 0.0),
                                                     ExponentialG(0.3), ExpSqrtLogG(1.0)]))
def test_round_trip(x, fam):
    if x > fam.x0 * (1 + 1e-9) and math.isfinite(fam(x)):
        assert g_inverse(fam, fam(x)) == pytest.approx(x, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(y=st.floats(0.0, 50.0), delta=st.floats(1e-6, 1.0))
def test_generalized_inverse_property(y, delta):
    g = StepG(np.arange(8.0), np.linspace(1.0, 15.0, 8))
    assert g_inverse(g, g(y) + delta) >= y


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.5, 30.0), b=st.floats(0.5, 30.0))
def test_inverse_monotone(a, b):
    g = IteratedLogG(2, 1.2, 0.1)
    lo, hi = sorted((a, b))
    assert g_inverse(g, lo) <= g_inverse(g, hi)
