"""Predicted limsup constants and finite-horizon experiments.

For a Sato process X with exponent H and a normalizer g, the constant C in
limsup |X(t)| / (t^H g(log t)) = C a.s. is computed from decidable criteria:
closed forms for registered (kernel, normalizer) pairs, the integral
dichotomy when K is in OR, the moment dichotomy when g^{-1} + log is in OR,
and a delta search on the kernel integral when g^{-1} is submultiplicative.
Monte Carlo experiments only report trend bands, never a value of C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io, sampler
from .errors import Inconclusive
from .g_toolkit import (
    GFunction,
    InverseClass,
    LogLogRatioG,
    WeibullTypeG,
    YoungTypeG,
    is_submultiplicative,
)
from .levy_core import (
    Lognormal,
    LogWeibull,
    PowerLog,
    ProcessSpec,
    Stable,
    Stretched,
    StudentT,
    TailFamily,
    TailFn,
    Vanishing,
    K_tailfn,
)
from .rng import as_stream
from .tail_analysis import classify_OR

TOL = 1e-9
INF = math.inf

# rule labels
R_SUPPORT = "support_cutoff"          # C = inf{r : K(r) = 0} for g = log x / log log x
R_WEIBULL = "weibull_type"            # liminf -log K / (r^a f(log r)) = C^{-a}
R_YOUNG = "young_conjugate"           # liminf h^{-1}(-log K(r)) / r = C^{-1}
R_OR = "or_dichotomy"                 # K in OR: C in {0, inf} by the integral of F(g)
R_MOMENT = "moment_dichotomy"         # g^{-1} + log in OR: C in {0, inf} by the rho_1 moment
R_KERNEL = "kernel_moment"            # g^{-1} submultiplicative: delta threshold of int K g^{-1}(r/delta) dr/r
R_MU = "mu_moment"                    # delta threshold of int g^{-1}(|x|/delta) mu(dx)


# --------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class TestResult:
    verdict: str
    route: str
    evidence: dict = field(default_factory=dict)

    def __str__(self):
        return self.verdict

    def to_dict(self):
        return {"verdict": self.verdict, "route": self.route, "evidence": self.evidence}


@dataclass(frozen=True)
class LimsupPrediction:
    """C in [0, inf] with the rule that produced it and the checked hypotheses."""

    C: float
    rule: str
    assumptions_checked: tuple
    source: str | None = None
    route: str = "analytic"
    bracket: tuple | None = None
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "C": io.encode_scalar(float(self.C)),
            "rule": self.rule,
            "source": self.source,
            "route": self.route,
            "bracket": None if self.bracket is None else [io.encode_scalar(float(b)) for b in self.bracket],
            "assumptions_checked": [[h, io.jsonable(v)] for h, v in self.assumptions_checked],
            "evidence": io.jsonable(self.evidence),
        }


@dataclass(frozen=True)
class Critical:
    """Threshold of a delta-indexed integral: finite for delta > delta, infinite below."""

    delta: float
    at_boundary: str | None = None  # "finite" | "infinite" | None (undecided)
    note: str = ""

    def verdict(self, delta: float, finite="Finite", infinite="Infinite") -> str:
        d = self.delta
        if d == 0.0 or (math.isfinite(d) and delta > d * (1 + TOL)):
            return finite
        if d == INF or delta < d * (1 - TOL):
            return infinite
        return {"finite": finite, "infinite": infinite}.get(self.at_boundary, "Inconclusive")


# --------------------------------------------------------------------------
# analytic engine


def _bertrand_converges(b) -> bool:
    """int^inf prod_k (log_{(k)} x)^{-b_k} dx, log_{(0)} x = x: the first
    exponent different from 1 decides (trailing exponents are 0)."""
    for bk in list(b) + [0.0]:
        if abs(bk - 1.0) > TOL:
            return bk > 1.0
    return False  # unreachable


def _cmp_lex(u, v) -> int:
    for a, b in zip(u, v):
        if abs(a - b) > TOL:
            return 1 if a > b else -1
    return 0


def critical_delta(T: TailFamily, w: InverseClass, form: str = "stieltjes") -> Critical | None:
    """Threshold of I(delta) = int^inf w(r/delta) dmu_T(r) (form 'stieltjes', mu_T
    the law with tail T) or int^inf T(r) w(r/delta) dr/r (form 'density').

    Returns None when the pair is not a registered composition.
    """
    if T is None or w is None:
        return None
    if isinstance(T, Vanishing):
        return Critical(0.0, "finite", "bounded support")
    if w.kind == "poly":
        ex = list(w.log_exponents)
        if isinstance(T, PowerLog):
            psi = [0.0] * len(ex)
            if form == "stieltjes" and ex[0] <= TOL:
                j = next((k for k, e in enumerate(ex) if abs(e) > TOL), None)
                if j is None:
                    return Critical(0.0, "finite", "bounded weight")
                for k in range(1, j + 1):
                    psi[k] = 1.0
            b = [1.0 + T.p - ex[0], T.q - ex[1] + psi[1]] + [-e + s for e, s in zip(ex[2:], psi[2:])]
            conv = _bertrand_converges(b)
            return Critical(0.0 if conv else INF, None, f"power-log exponents {b}")
        return Critical(0.0, "finite", "tail lighter than every power")
    if w.kind == "logquad":
        if isinstance(T, PowerLog):
            return Critical(INF, None, "log-quadratic weight against a power tail")
        if isinstance(T, LogWeibull):
            return Critical(0.0, "finite", "log-quadratic weight against a Weibull-type tail")
        if isinstance(T, Stretched):
            if w.c < T.a * (1 - TOL):
                return Critical(0.0, "finite", "quadratic coefficients")
            if w.c > T.a * (1 + TOL):
                return Critical(INF, None, "quadratic coefficients")
            # exponent 2c(shift - log delta) u at top order; boundary by the power of u
            threshold = 2.0 if form == "stieltjes" else 1.0
            at = "finite" if T.q > threshold + TOL else "infinite"
            return Critical(math.exp(T.shift), at, "equal quadratic coefficients")
        return None
    if w.kind == "exp":
        if w.a <= TOL:
            return None
        if isinstance(T, (PowerLog, Stretched)):
            return Critical(INF, None, "exponential-type weight against a subexponential tail")
        if isinstance(T, LogWeibull):
            s = _cmp_lex((w.a, w.b, w.e), (T.alpha, T.beta, 0.0))
            if s > 0:
                return Critical(INF, None, "weight grows faster than the tail decays")
            if s < 0:
                return Critical(0.0, "finite", "tail decays faster than the weight grows")
            return Critical((w.c / T.c) ** (1 / w.a), None, "matched exponents")
        return None
    return None



# --------------------------------------------------------------------------
# numeric doubling test

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _log_block(log_f, a: float, b: float, pieces: int = 4, log_scale: bool = True) -> float:
    """log of int_a^b exp(log_f(x)) dx by composite Gauss-Legendre."""
    if log_scale:
        s = np.linspace(math.log(a), math.log(b), pieces + 1)
    else:
        s = np.linspace(a, b, pieces + 1)
    mid = 0.5 * (s[1:] + s[:-1])[:, None]
    half = 0.5 * (s[1:] - s[:-1])[:, None]
    nodes = (mid + half * _GL_X[None, :]).ravel()
    wts = (half * _GL_W[None, :]).ravel()
    x = np.exp(nodes) if log_scale else nodes
    with np.errstate(all="ignore"):
        lv = np.asarray(log_f(x), float) + (nodes if log_scale else 0.0)
        lv = np.where(np.isnan(lv), -np.inf, lv)
        top = np.max(lv)
        if not np.isfinite(top):
            return float(top)
        return float(top + math.log(np.sum(wts * np.exp(lv - top))))


def _doubling_verdict(log_inc, window: int = 8, finite="Converges", infinite="Diverges"):
    li = np.asarray(log_inc, float)
    ev = {"log_increments": li[-(window + 1):].tolist()}
    if np.any(np.isposinf(li)):
        return infinite, ev
    if li.size < window + 1:
        return "Inconclusive", ev
    tail = li[-(window + 1):]
    if np.all(np.isneginf(tail[1:])):
        return finite, ev
    if np.all(np.isfinite(tail)):
        ratios = np.diff(tail)
        ev["log_ratios"] = ratios.tolist()
        if np.all(ratios < math.log(0.9)):
            return finite, ev
        if np.min(tail[1:]) >= tail[0] + math.log(0.95):
            return infinite, ev
    return "Inconclusive", ev


def _numeric_integral(log_f, kmax: int, x_cap: float = INF):
    """Increments of int_0^{2^k} exp(log_f(x)) dx for k = 0..kmax (capped at x_cap)."""
    inc = [_log_block(log_f, 0.0, 1.0, log_scale=False)]
    for k in range(1, kmax + 1):
        if 2.0**k > x_cap:
            break
        inc.append(_log_block(log_f, 2.0 ** (k - 1), 2.0**k))
    return inc


# --------------------------------------------------------------------------
# integral test


def _as_tailfn(F) -> TailFn:
    if isinstance(F, TailFamily):
        return TailFn.from_family(F)
    return F


def integral_test(F, g: GFunction, delta: float = 1.0, *, route: str = "auto", kmax: int = 60) -> TestResult:
    """Convergence of int_0^inf F(delta g(x)) dx."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    F = _as_tailfn(F)
    fam = F.family
    if route in ("auto", "analytic"):
        if F.vanishes():
            return TestResult("Converges", "analytic", {"reason": "F vanishes beyond a finite point"})
        asym = g.asymptotics()
        if isinstance(fam, PowerLog) and asym is not None:
            if asym.exps is not None:
                e = list(asym.exps)
                j = next((k for k, v in enumerate(e) if v > TOL), None)
                if j is not None:
                    b = [fam.p * v for v in e] + [0.0]
                    b[j + 1] += fam.q
                    conv = _bertrand_converges(b)
                    return TestResult("Converges" if conv else "Diverges", "analytic",
                                      {"integrand_exponents": b, "form": "iterated power-log"})
            if asym.theta == INF:
                conv = fam.p > 0 or fam.q > 1
                return TestResult("Converges" if conv else "Diverges", "analytic", {"form": "exponential g"})
        w = g.inverse_class()
        crit = critical_delta(fam, w, "stieltjes") if fam is not None else None
        if crit is not None:
            v = crit.verdict(delta, "Converges", "Diverges")
            if v != "Inconclusive" or route == "analytic":
                return TestResult(v, "analytic", {"critical_delta": crit.delta, "note": crit.note})
        if route == "analytic":
            return TestResult("Inconclusive", "analytic", {"reason": "no registered composition"})

    def log_f(x):
        return F.log_value(delta * np.asarray(g(x), float))

    inc = _numeric_integral(log_f, kmax)
    verdict, ev = _doubling_verdict(inc)
    return TestResult(verdict, "numeric", ev)


# --------------------------------------------------------------------------
# moment test


def mu_tail_family(spec: ProcessSpec) -> TailFamily | None:
    """Asymptotic family of mu(|x| > r), including the Gaussian and bounded-kernel cases."""
    if spec.is_gaussian():
        lam = float(np.max(np.linalg.eigvalsh(spec.A())))
        return LogWeibull(1 / (2 * lam), 2.0, 0.0)
    fam = spec.mu_tail_family()
    if fam is not None:
        return fam
    if spec.gaussian_part is not None and np.any(spec.A()):
        end = spec.support_end()
        if math.isfinite(end):
            lam = float(np.max(np.linalg.eigvalsh(spec.A())))
            return LogWeibull(1 / (2 * lam), 2.0, 0.0)
        return None
    end = spec.support_end()
    if math.isfinite(end) and end > 0:
        # -log mu(|x| > r) ~ r log r / end
        return LogWeibull(1 / end, 1.0, 1.0)
    return None


def _rho1_critical(spec: ProcessSpec, w: InverseClass) -> Critical | None:
    if w is None:
        return None
    kf = spec.K_family()
    if isinstance(kf, PowerLog):
        return critical_delta(kf, w, "stieltjes")
    if w.kind == "poly" and isinstance(kf, (LogWeibull, Stretched, Vanishing)):
        return Critical(0.0, "finite", "K lighter than every power: rho_1 has all power moments")
    return None


def _completion(T: TailFamily, anchor_r: float, anchor_tail: float, g: GFunction, delta: float) -> float:
    """int_{r0}^inf g^{-1}(r/delta) dmu(r) for a tail proportional to T, anchored at r0."""
    r = np.geomspace(anchor_r, anchor_r * 1e15, 4001)
    lt = T.log_value(r) - float(T.log_value(anchor_r)) + math.log(anchor_tail)
    with np.errstate(over="ignore"):
        w = np.asarray(g.inverse(r / delta), float)
    tail = np.exp(lt)
    return float(w[0] * tail[0] + np.sum(0.5 * (tail[1:] + tail[:-1]) * np.diff(w)))


def moment_test(spec: ProcessSpec, g: GFunction, delta: float = 1.0, n_mc: int = 0, *, law: str = "mu",
                rng=None, route: str = "auto", quantile: float = 0.999) -> TestResult:
    """Finiteness of int g^{-1}(|x| / delta) law(dx), law mu or rho_1."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if law not in ("mu", "rho1"):
        raise ValueError("law must be 'mu' or 'rho1'")
    w = g.inverse_class()
    T = mu_tail_family(spec) if law == "mu" else None
    crit = critical_delta(T, w, "stieltjes") if law == "mu" else _rho1_critical(spec, w)
    analytic = None
    if crit is not None:
        analytic = TestResult(crit.verdict(delta), "analytic", {"critical_delta": crit.delta, "note": crit.note})
        if route == "analytic" or n_mc <= 0:
            return analytic
    if route == "analytic" or n_mc <= 0:
        return analytic or TestResult("Inconclusive", "analytic", {"reason": "no registered composition"})
    stream = as_stream(rng)
    if law == "mu":
        x = sampler.sample_marginal(spec, stream.child("moment"), int(n_mc))
    else:
        x = sampler.sample_rho_l(sampler.IncrementLaw.default(spec, 1), stream.child("moment"), int(n_mc))
    a = np.sort(np.linalg.norm(np.asarray(x).reshape(int(n_mc), -1), axis=1))
    r0 = float(np.quantile(a, quantile))
    with np.errstate(over="ignore"):
        body = np.asarray(g.inverse(a[a <= r0] / delta), float)
    est = float(np.sum(body) / a.size)
    ev = {"n_mc": int(n_mc), "truncation": r0, "body": est}
    if crit is None:
        ev["reason"] = "raw Monte Carlo cannot certify an infinite expectation"
        return TestResult("Inconclusive", "mc", ev)
    v = crit.verdict(delta)
    if v == "Finite" and T is not None:
        ev["completion"] = _completion(T, r0, float(np.mean(a > r0)) or 1.0 / a.size, g, delta)
        ev["estimate"] = est + ev["completion"]
    ev["critical_delta"] = crit.delta
    return TestResult(v, "mc", ev)


# --------------------------------------------------------------------------
# kernel integral (submultiplicative g^{-1})


def _kernel_shift_ratio_ok(spec: ProcessSpec, Kfn: TailFn) -> tuple:
    """limsup K(e^H r) / K(r) < 1, needed to use K in place of K - K(e^H .)."""
    fam = Kfn.family
    if isinstance(fam, PowerLog):
        return fam.p > 0, math.exp(-fam.p * spec.H)
    if isinstance(fam, (LogWeibull, Stretched, Vanishing)):
        return True, 0.0
    r = Kfn.r[-40:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.exp(Kfn.log_value(r * math.exp(spec.H)) - Kfn.log_value(r))
    ratio = ratio[np.isfinite(ratio)]
    if ratio.size == 0:
        return True, 0.0
    m = float(np.max(ratio))
    return m < 1 - 1e-6, m


def log_K_function(spec: ProcessSpec):
    """r -> log K(r) from the kernels' own log-values (no underflow)."""
    prof = spec.profile()
    parts = [(math.log(w), k) for w, k in zip(prof.directions.weights, prof.kernels) if w > 0 and not k.is_zero()]

    def log_k(r):
        r = np.asarray(r, float)
        if not parts:
            return np.full(r.shape, -np.inf)
        with np.errstate(divide="ignore"):
            stack = np.stack([lw + np.asarray(k.log_value(r), float) for lw, k in parts])
        return np.logaddexp.reduce(stack, axis=0)

    return log_k


def _kernel_numeric(log_k, g: GFunction, delta: float, H: float, use_difference: bool) -> TestResult:
    """Doubling test for int_1^inf K(r) g^{-1}(r/delta) dr/r (K - K(e^H .) if requested)."""

    def log_f(x):
        r = 1.0 + np.asarray(x, float)
        lk = log_k(r)
        if use_difference:
            with np.errstate(divide="ignore", invalid="ignore"):
                lk = lk + np.log1p(-np.exp(log_k(r * math.exp(H)) - lk))
        with np.errstate(divide="ignore", over="ignore"):
            lw = np.asarray(g.log_inverse(r / delta), float)
        return lk + lw - np.log(r)

    inc = _numeric_integral(log_f, 60)
    v, ev = _doubling_verdict(inc, finite="Finite", infinite="Infinite")
    return TestResult(v, "numeric", ev)


def _bisect_kernel(log_k, g, H, use_difference, lo=1e-6, hi=1e6, max_tests=40, factor=2 ** 0.25):
    tests = []

    def test(d):
        res = _kernel_numeric(log_k, g, d, H, use_difference)
        tests.append((d, res.verdict))
        return res.verdict

    v_lo = test(lo)
    if v_lo == "Finite":
        return 0.0, (0.0, lo), tests
    v_hi = test(hi)
    if v_hi == "Infinite":
        return INF, (hi, INF), tests
    if v_lo != "Infinite" or v_hi != "Finite":
        return None, (lo, hi), tests
    while hi / lo > factor and len(tests) < max_tests:
        mid = math.sqrt(lo * hi)
        v = test(mid)
        if v == "Finite":
            hi = mid
        elif v == "Infinite":
            lo = mid
        else:
            # undecided near the threshold: close in from both sides instead
            moved = False
            for d in (math.sqrt(lo * mid), math.sqrt(mid * hi)):
                if len(tests) >= max_tests:
                    break
                u = test(d)
                if u == "Infinite" and d > lo:
                    lo, moved = d, True
                elif u == "Finite" and d < hi:
                    hi, moved = d, True
            if not moved:
                break
    return math.sqrt(lo * hi), (lo, hi), tests


# --------------------------------------------------------------------------
# closed forms


def kernel_liminf(spec: ProcessSpec, alpha: float, beta: float, allow_mu: bool = True):
    """liminf -log K(r) / (r^alpha (log r)^beta) in [0, inf], or None if unknown."""
    if spec.is_gaussian():
        return INF
    fams = [spec.K_family()]
    if allow_mu:
        fams.append(spec.mu_tail_family())
    for fam in fams:
        if isinstance(fam, Vanishing):
            return INF
        if isinstance(fam, (PowerLog, Stretched)):
            return 0.0
        if isinstance(fam, LogWeibull):
            s = _cmp_lex((fam.alpha, fam.beta), (alpha, beta))
            return INF if s > 0 else 0.0 if s < 0 else fam.c
    return None


def _weibull_C(alpha, beta, c):
    if c == INF:
        return 0.0
    if c == 0.0:
        return INF
    return alpha ** (beta / alpha) * c ** (-1 / alpha)


def _young_C(alpha, beta, c):
    if c == INF:
        return 0.0
    if c == 0.0:
        return INF
    if abs(alpha - 1) < TOL:
        return 1 / c
    return alpha ** ((beta - alpha) / alpha) * (alpha - 1) ** ((alpha - 1) / alpha) * c ** (-1 / alpha)


def _source(spec: ProcessSpec) -> str | None:
    m = spec.marginal
    return {Stable: "stable", StudentT: "student_t", Lognormal: "lognormal"}.get(type(m))


def predict_C(spec: ProcessSpec, g: GFunction, *, delta_range=(1e-6, 1e6), max_tests: int = 40,
              use_numeric_submult: bool = True) -> LimsupPrediction:
    """Constant C of the limsup law, or Inconclusive with the hypothesis trail."""
    trail = [("spec non-deterministic", True)]
    chk = g.check()
    trail.append(("g positive, nondecreasing, unbounded", all(chk.values())))
    if not all(chk.values()):
        raise Inconclusive("g is not a normalizing function", trail)
    base = g.base
    src = _source(spec)

    # (a) closed forms keyed by the normalizer family
    if isinstance(base, LogLogRatioG):
        trail.append(("g = log x / log log x", True))
        C = spec.support_end()
        trail.append(("inf{r : K(r) = 0}", C))
        return LimsupPrediction(C, R_SUPPORT, tuple(trail), src)
    if isinstance(base, WeibullTypeG):
        a, b = base.alpha, base.beta
        ok = 0 < a < 1 or (abs(a - 1) < TOL and b <= 0)
        trail.append(("exp(r^a (log r)^b) submultiplicative (a < 1, or a = 1 and b <= 0)", ok))
        if ok:
            c = kernel_liminf(spec, a, b)
            trail.append(("liminf -log K(r) / (r^a (log r)^b)", c))
            if c is not None:
                return LimsupPrediction(_weibull_C(a, b, c), R_WEIBULL, tuple(trail), src,
                                        evidence={"alpha": a, "beta": b, "c": c})
    if isinstance(base, YoungTypeG):
        a, b = base.alpha, base.beta
        ok = a > 1 + TOL or (abs(a - 1) < TOL and b > 0)
        trail.append(("young-conjugate range (a > 1, or a = 1 and b > 0)", ok))
        if ok:
            c = kernel_liminf(spec, a, b, allow_mu=False)
            trail.append(("liminf -log K(r) / (r^a (log r)^b)", c))
            if c is not None:
                return LimsupPrediction(_young_C(a, b, c), R_YOUNG, tuple(trail), src,
                                        evidence={"alpha": a, "beta": b, "c": c})
    w = g.inverse_class()
    if isinstance(spec.marginal, Lognormal) and w is not None:
        # for the lognormal law the mu-moment threshold is necessary and sufficient
        crit = critical_delta(mu_tail_family(spec), w, "stieltjes")
        trail.append(("lognormal marginal: mu-moment criterion is exact", crit is not None))
        if crit is not None:
            return LimsupPrediction(crit.delta, R_MU, tuple(trail), "lognormal",
                                    evidence={"note": crit.note})

    # (b) K in OR
    Kfn = K_tailfn(spec)
    orv = classify_OR(Kfn) if not Kfn.vanishes() else None
    k_or = orv is not None and orv.verdict == "InClass"
    trail.append(("K in OR", orv.verdict if orv is not None else "NotInClass"))
    if k_or:
        res = integral_test(Kfn, g, 1.0)
        trail.append(("integral of K(g(x)) dx", res.verdict))
        if res.verdict != "Inconclusive":
            C = 0.0 if res.verdict == "Converges" else INF
            return LimsupPrediction(C, R_OR, tuple(trail), src, res.route, evidence=res.to_dict())

    # (c) g^{-1} + log in OR
    in_or = None if w is None else w.in_OR
    trail.append(("g^{-1}(x) + log x in OR", "unknown" if in_or is None else in_or))
    if in_or:
        res = moment_test(spec, g, 1.0, law="rho1")
        trail.append(("rho_1 moment of g^{-1}", res.verdict))
        if res.verdict != "Inconclusive":
            C = 0.0 if res.verdict == "Finite" else INF
            return LimsupPrediction(C, R_MOMENT, tuple(trail), src, res.route, evidence=res.to_dict())

    # (d) g^{-1} submultiplicative: delta threshold of the kernel integral
    sub = None if w is None else w.submultiplicative
    if sub is None and use_numeric_submult:
        v = is_submultiplicative(lambda x: np.asarray(g.inverse(x), float) + 1.0, budget=20_000)
        sub = {"Yes": True, "No": False}.get(v.verdict)
    trail.append(("g^{-1} submultiplicative", "unknown" if sub is None else sub))
    if sub:
        ok, ratio = _kernel_shift_ratio_ok(spec, Kfn)
        trail.append(("limsup K(e^H r)/K(r) < 1", ok))
        crit = critical_delta(Kfn.family, w, "density") if (ok and w is not None) else None
        if crit is not None:
            return LimsupPrediction(crit.delta, R_KERNEL, tuple(trail), src,
                                    bracket=(crit.delta, crit.delta), evidence={"note": crit.note})
        C, br, tests = _bisect_kernel(log_K_function(spec), g, spec.H, not ok, *delta_range, max_tests=max_tests)
        trail.append(("kernel integral delta search", "bracketed" if C is not None else "Inconclusive"))
        if C is not None:
            return LimsupPrediction(C, R_KERNEL, tuple(trail), src, "numeric", br,
                                    {"tests": [[d, v] for d, v in tests]})

    # (e) mu-moment sufficiency: a finite threshold is the constant
    crit = critical_delta(mu_tail_family(spec), w, "stieltjes")
    trail.append(("mu-moment threshold finite", None if crit is None else math.isfinite(crit.delta)))
    if crit is not None and math.isfinite(crit.delta):
        return LimsupPrediction(crit.delta, R_MU, tuple(trail), src, evidence={"note": crit.note})
    raise Inconclusive("no criterion decided the constant", trail)


# --------------------------------------------------------------------------
# normalizer classification


@dataclass(frozen=True)
class GFamilyVerdict:
    verdict: str  # NormalizableExists | NoProcessExists | PaperOpen
    case: str
    construction: str | None = None
    constants: dict = field(default_factory=dict)

    def to_dict(self):
        return {"verdict": self.verdict, "case": self.case, "construction": self.construction,
                "constants": io.jsonable(self.constants)}


def _classify_inverse(w: InverseClass) -> GFamilyVerdict:
    k = {"c": w.c, "a": w.a, "b": w.b, "e": w.e}
    if w.kind == "poly":
        return GFamilyVerdict("NoProcessExists", "g^{-1} + log in OR", None, {"p": w.p, "q": w.q})
    if w.kind == "logquad":
        return GFamilyVerdict("NormalizableExists", "submultiplicative inverse", "build_K_from_g", {"c": w.c})
    a, b, e = w.a, w.b, w.e
    eq = lambda x, y: abs(x - y) <= TOL  # noqa: E731
    if a < 1 - TOL or (eq(a, 1) and (b < -TOL or (eq(b, 0) and e <= TOL))):
        return GFamilyVerdict("NormalizableExists", "submultiplicative inverse", "build_K_from_g", k)
    if eq(a, 1):
        if 0 < b < 1 - TOL or (eq(b, 0) and e > TOL) or (eq(b, 1) and e < -TOL):
            return GFamilyVerdict("NormalizableExists", "exp(x f^{-1}(log x)) envelope", "young_conjugate_kernel", k)
        if eq(b, 1) and eq(e, 0):
            return GFamilyVerdict("NormalizableExists", "exp(c x log x) envelope", "truncated_kernel", k)
        return GFamilyVerdict("NoProcessExists", "between exp(c x log x) and exp(c x^2)", None, k)
    if a < 2 - TOL:
        return GFamilyVerdict("NoProcessExists", "between exp(c x log x) and exp(c x^2)", None, k)
    if eq(a, 2):
        if eq(b, 0) and eq(e, 0):
            return GFamilyVerdict("NormalizableExists", "exp(c x^2) envelope", "gaussian", k)
        if b > TOL or (eq(b, 0) and e > TOL):
            return GFamilyVerdict("NoProcessExists", "faster than every exp(c x^2)", None, k)
        return GFamilyVerdict("NoProcessExists", "between exp(c x log x) and exp(c x^2)", None, k)
    return GFamilyVerdict("NoProcessExists", "faster than every exp(c x^2)", None, k)


def classify_g_family(g: GFunction, *, x_max: float = 1e4, n: int = 200) -> GFamilyVerdict:
    """Existence of a process with C = 1 for the normalizer g."""
    w = g.inverse_class()
    if w is not None:
        return _classify_inverse(w)
    x = np.geomspace(4.0, x_max, n)
    with np.errstate(divide="ignore", over="ignore"):
        phi = np.asarray(g.log_inverse(x), float)
    ok = np.isfinite(phi) & (phi > 0)
    if ok.sum() < 20:
        raise Inconclusive("g^{-1} not resolvable on the probe grid", [("finite log g^{-1} nodes", int(ok.sum()))])
    x, phi = x[ok], phi[ok]
    lx = np.log(x)
    top = slice(-max(10, len(x) // 5), None)
    if np.max(phi / lx) < 4 * np.max((phi / lx)[: len(x) // 5]) and np.ptp((phi / lx)[top]) < 0.05 * np.max(phi / lx):
        return GFamilyVerdict("NoProcessExists", "g^{-1} + log in OR", None, {"order": float(np.median((phi / lx)[top]))})
    a_hat = float(np.polyfit(lx[top], np.log(phi[top]), 1)[0])
    r2 = phi / x**2
    r1 = phi / (x * lx)
    stable = lambda r: np.ptp(np.log(r[top])) < 0.1  # noqa: E731

    def oscillates(r):
        # bounded band around an envelope, crossed both ways: neither asymptotic nor divergent
        d = np.diff(np.log(r[top]))
        return not stable(r) and np.ptp(np.log(r[top])) < math.log(100) and d.max() > 0 > d.min()

    for target, ratio, env in ((2.0, r2, "exp(c x^2)"), (1.0, r1, "exp(c x log x)")):
        if abs(a_hat - target) < 0.5 and oscillates(ratio):
            band = np.exp([np.log(ratio[top]).min(), np.log(ratio[top]).max()])
            return GFamilyVerdict("PaperOpen", f"g^{{-1}} oscillates between two {env} envelopes", None,
                                  {"a_hat": a_hat, "c_low": float(band[0]), "c_high": float(band[1])})
    if abs(a_hat - 2) < 0.05 and stable(r2):
        return GFamilyVerdict("NormalizableExists", "exp(c x^2) envelope", "gaussian", {"c": float(r2[-1]), "a_hat": a_hat})
    if a_hat > 2.05:
        return GFamilyVerdict("NoProcessExists", "faster than every exp(c x^2)", None, {"a_hat": a_hat})
    if 1.05 < a_hat < 1.95:
        return GFamilyVerdict("NoProcessExists", "between exp(c x log x) and exp(c x^2)", None, {"a_hat": a_hat})
    if abs(a_hat - 1) < 0.05 and stable(r1):
        return GFamilyVerdict("NormalizableExists", "exp(c x log x) envelope", "truncated_kernel", {"c": float(r1[-1]), "a_hat": a_hat})
    if a_hat < 0.95:
        return GFamilyVerdict("NormalizableExists", "submultiplicative inverse", "build_K_from_g", {"a_hat": a_hat})
    raise Inconclusive("envelopes cannot be separated on the grid", [("fitted exponent", a_hat)])


# --------------------------------------------------------------------------
# experiments

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    spec: ProcessSpec
    g: GFunction
    N: int
    paths: int
    checkpoints: tuple
    levels: tuple
    quantiles: np.ndarray        # (checkpoints, levels) of S_P
    current_medians: np.ndarray  # median |Y(n)| / (e^{nH} g(n)) at each checkpoint
    record_fraction: float       # paths with a new record in (N/2, N]
    trend: str                   # up | down | stable
    predicted: LimsupPrediction | None
    prediction_trail: tuple = ()
    seed: str = ""
    sample_meta: dict = field(default_factory=dict)

    @property
    def medians(self) -> np.ndarray:
        return self.quantiles[:, self.levels.index(0.5)]

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "g": self.g.to_dict(),
            "N": self.N,
            "paths": self.paths,
            "checkpoints": list(self.checkpoints),
            "levels": list(self.levels),
            "quantiles": [io.encode_array(row) for row in self.quantiles],
            "current_medians": io.encode_array(self.current_medians),
            "record_fraction": self.record_fraction,
            "trend": self.trend,
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "prediction_trail": [[h, io.jsonable(v)] for h, v in self.prediction_trail],
            "seed": self.seed,
            "sample": io.jsonable(self.sample_meta),
        }

    def columns(self) -> np.ndarray:
        """One row per checkpoint: n, the S_P quantiles, the current median."""
        return np.column_stack([np.asarray(self.checkpoints, float), self.quantiles, self.current_medians])

    def write(self, report_path, columns_path=None):
        io.write_document(report_path, self.to_dict())
        if columns_path is not None:
            hdr = "n " + " ".join(f"q{lv:g}" for lv in self.levels) + " current_median"
            io.write_columnar(columns_path, self.columns(), hdr)


def running_sup(sample: sampler.PathSample, g: GFunction) -> tuple:
    """(Z, S): Z(n) = |Y(n)| / (e^{nH} g(n)) and its running maximum, shape (paths, N+1)."""
    n = np.arange(sample.n_steps + 1) * sample.l
    z = np.linalg.norm(sample.normalized(), axis=2) / np.asarray(g(n.astype(float)), float)[None, :]
    return z, np.maximum.accumulate(z, axis=1)


def _trend(medians, record_fraction, growth=0.05, records=0.2):
    """up: median S_P strictly increasing with >= 5% growth over the last half;
    down: sup saturating (growth < 5%, records below 20%); else stable."""
    med = np.asarray(medians, float)
    if med.size < 2:
        return "stable"
    last = med[-1] / med[-2] - 1 if med[-2] > 0 else INF
    if bool(np.all(np.diff(med) > 0)) and last >= growth:
        return "up"
    if last < growth and record_fraction < records:
        return "down"
    return "stable"


def run_experiment(spec: ProcessSpec, g: GFunction, N: int, paths: int, rng=None, *, threads: int = 1,
                   series_tol: float = 1e-3, levels=QUANTILE_LEVELS, sample: sampler.PathSample | None = None,
                   epsilon=None) -> ExperimentReport:
    """Simulate ``paths`` sequences Y(n) = X(e^n), n <= N, and summarize the running sup."""
    if int(N) != N or N < 0:
        raise ValueError("N must be a nonnegative integer")
    if int(paths) != paths or paths < 1:
        raise ValueError("paths must be a positive integer")
    stream = as_stream(rng)
    if sample is None:
        sample = sampler.simulate_sequence(spec, stream, int(N), 1, int(paths), series_tol, epsilon, threads)
    z, s = running_sup(sample, g)
    cps = tuple(sorted({int(N) // 4, int(N) // 2, int(N)}))
    q = np.quantile(s[:, list(cps)], levels, axis=0).T
    cur = np.median(z[:, list(cps)], axis=0)
    half = int(N) // 2
    rec = float(np.mean(s[:, int(N)] > s[:, half])) if N > 0 else 0.0
    try:
        pred, trail = predict_C(spec, g), ()
    except Inconclusive as exc:
        pred, trail = None, tuple(exc.trail)
    med = q[:, list(levels).index(0.5)] if 0.5 in levels else np.median(s[:, list(cps)], axis=0)
    return ExperimentReport(spec, g, int(N), int(paths), cps, tuple(levels), q, cur, rec,
                            _trend(med, rec), pred, trail, sample.seed, sample.meta())


__all__ = [
    "Critical",
    "ExperimentReport",
    "GFamilyVerdict",
    "LimsupPrediction",
    "TestResult",
    "classify_g_family",
    "critical_delta",
    "integral_test",
    "kernel_liminf",
    "log_K_function",
    "moment_test",
    "mu_tail_family",
    "predict_C",
    "run_experiment",
    "running_sup",
]
