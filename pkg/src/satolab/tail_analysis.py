"""Classification of tail functions into OR, D and OS, plus numerical checks of
tail equivalence and of the convolution-tail inequalities.

All numeric verdicts are finite-grid evidence only and carry a confidence
label; analytic confidence is reserved for tails with a registered family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import ConvolutionOverflow, GridTooShort, InsufficientSamples, PreconditionFailed
from .levy_core import (
    LogWeibull,
    PowerLog,
    ProcessSpec,
    Stretched,
    TailFn,
    Vanishing,
    K_tailfn,
    L_of_r,
    M_of_r,
)

RATIO_BAND = (1e-3, 1.0)
FLAT_SLOPE = 0.1
TRUST_BAND = (1 / 50, 50)
MAX_CELLS = 10**8


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str  # InClass | NotInClass | Inconclusive
    confidence: str  # analytic | numeric-strong | numeric-weak
    evidence: dict = field(default_factory=dict)
    ell_star: float | None = None

    def __post_init__(self):
        if self.verdict not in ("InClass", "NotInClass", "Inconclusive"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.confidence not in ("analytic", "numeric-strong", "numeric-weak"):
            raise ValueError(f"bad confidence {self.confidence!r}")

    @property
    def in_class(self) -> bool:
        return self.verdict == "InClass"

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "confidence": self.confidence,
            "ell_star": self.ell_star,
            "evidence": io.jsonable(self.evidence),
        }


def _slope(x, y):
    """Least-squares slope of y against x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xc = x - x.mean()
    den = float(np.dot(xc, xc))
    return float(np.dot(xc, y - y.mean()) / den) if den > 0 else 0.0


# --------------------------------------------------------------------------
# OR and D


def _analytic_OR(fam):
    if isinstance(fam, PowerLog):
        return "InClass"
    if isinstance(fam, (LogWeibull, Stretched, Vanishing)):
        return "NotInClass"
    return None


def classify_OR(f: TailFn, *, decades: float = 6.0, route: str = "auto") -> ClassificationVerdict:
    """Is f(c r) of the order f(r) for every c > 0?

    The numeric route works with the symmetric ratio exp(-|log f(2r) - log f(r)|)
    (f(2r)/f(r) for decreasing f) over the top ``decades`` of the grid.
    """
    if f.vanishes():
        conf = "analytic" if isinstance(f.family, Vanishing) else "numeric-strong"
        return ClassificationVerdict("NotInClass", conf, {"reason": "vanishes beyond a finite point"})
    if route in ("auto", "analytic") and f.family is not None:
        v = _analytic_OR(f.family)
        if v is not None:
            return ClassificationVerdict(v, "analytic", {"family": f.family.to_dict()})
    if f.decades < 4:
        raise GridTooShort(f"grid covers {f.decades:.2f} decades; at least 4 are needed")
    top = f.r[-1]
    lo = max(f.r[0], top * 10.0 ** (-decades))
    r = np.geomspace(lo, top / 2, max(60, int(20 * min(decades, f.decades))))
    lv = f.log_value(r)
    lv2 = f.log_value(2 * r)
    if not (np.all(np.isfinite(lv)) and np.all(np.isfinite(lv2))):
        return ClassificationVerdict("NotInClass", "numeric-strong", {"reason": "tail underflows to 0 on the grid"})
    log_ratio = -np.abs(lv2 - lv)
    ratio = np.exp(log_ratio)
    lr = np.log(r)
    last3 = lr >= lr[-1] - 3 * math.log(10)
    slope = _slope(lr[last3], log_ratio[last3])
    in_band = bool(np.all((ratio >= RATIO_BAND[0]) & (ratio <= RATIO_BAND[1] + 1e-12)))
    # per-decade decay of the ratio over the last three decades
    d_idx = [int(np.argmin(np.abs(lr - (lr[-1] - k * math.log(10))))) for k in (3, 2, 1, 0)]
    per_decade = [float(log_ratio[a] - log_ratio[b]) for a, b in zip(d_idx[:-1], d_idx[1:])]
    tail_ratio = log_ratio[last3]
    monotone = bool(np.all(np.diff(tail_ratio) <= 1e-12))
    evidence = {
        "r": r,
        "ratio": ratio,
        "slope_last_3_decades": slope,
        "log_decay_per_decade": per_decade,
        "all_in_band": in_band,
    }
    if in_band and abs(slope) < FLAT_SLOPE:
        conf = "numeric-strong" if abs(slope) < FLAT_SLOPE / 4 else "numeric-weak"
        return ClassificationVerdict("InClass", conf, evidence)
    if monotone and all(p > math.log(10) for p in per_decade):
        return ClassificationVerdict("NotInClass", "numeric-strong", evidence)
    if monotone and sum(per_decade) > math.log(10) and slope <= -FLAT_SLOPE:
        return ClassificationVerdict("NotInClass", "numeric-weak", evidence)
    return ClassificationVerdict("Inconclusive", "numeric-weak", evidence)


def classify_D(f: TailFn, **kw) -> ClassificationVerdict:
    """Dominated variation: monotone members of OR."""
    v = np.asarray(f.values, float)
    d = np.diff(v)
    monototone_dec = bool(np.all(d <= 1e-12 * np.abs(v[:-1])))
    monotone_inc = bool(np.all(d >= -1e-12 * np.abs(v[:-1])))
    if not (monototone_dec or monotone_inc):
        return ClassificationVerdict("NotInClass", "numeric-strong", {"reason": "not monotone on the grid"})
    out = classify_OR(f, **kw)
    return ClassificationVerdict(out.verdict, out.confidence, {**out.evidence, "monotone": True})


# --------------------------------------------------------------------------
# radial distributions and OS


@dataclass(frozen=True, eq=False)
class RadialDistribution:
    """Distribution on R+ from its tail T(r) = zeta(x > r) on a log grid.

    Mass 1 - T(r[0]) sits at 0; on each grid cell the tail is log-log linear;
    beyond the last node the tail follows ``family`` (anchored), or a power law
    with exponent ``tail_exponent`` (inf means no mass beyond the grid).
    """

    r: np.ndarray
    tail: np.ndarray
    tail_exponent: float | None = None
    family: object = None

    def __post_init__(self):
        r = np.asarray(self.r, float)
        t = np.asarray(self.tail, float)
        if r.ndim != 1 or r.shape != t.shape or r.size < 3 or np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("radial distribution needs an increasing positive grid")
        if np.any(t < 0) or np.any(t > 1 + 1e-12) or np.any(np.diff(t) > 1e-15):
            raise ValueError("tail values must be decreasing within [0, 1]")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "tail", np.minimum(t, 1.0))
        if self.tail_exponent is None:
            lt = np.log(np.maximum(t[-2:], 1e-320))
            s = -(lt[1] - lt[0]) / math.log(r[-1] / r[-2]) if t[-1] > 0 else math.inf
            object.__setattr__(self, "tail_exponent", float(s))

    @classmethod
    def from_tailfn(cls, f: TailFn) -> "RadialDistribution":
        """Normalize a decreasing tail so the grid start carries mass 1."""
        v = np.asarray(f.values, float)
        return cls(f.r, v / v[0], None, f.family)

    @classmethod
    def from_samples(cls, x, n_grid=200, lo_q=0.5) -> "RadialDistribution":
        a = np.sort(np.abs(np.asarray(x, float).ravel()))
        r = np.geomspace(max(np.quantile(a, lo_q), 1e-300), a[-1], n_grid)
        tail = 1.0 - np.searchsorted(a, r, side="right") / a.size
        return cls(r, tail)

    def vanishes(self) -> bool:
        return bool(self.tail[-1] == 0.0) or isinstance(self.family, Vanishing)

    @property
    def decades(self) -> float:
        return math.log10(self.r[-1] / self.r[0])

    def T(self, x):
        """zeta(x' > x) for x >= 0."""
        x = np.asarray(x, float)
        lr = np.log(self.r)
        with np.errstate(divide="ignore"):
            lt = np.log(self.tail)
            lx = np.log(np.maximum(x, 1e-320))
        out = np.ones(x.shape)
        inside = (x >= self.r[0]) & (x <= self.r[-1])
        if inside.any():
            idx = np.clip(np.searchsorted(lr, lx[inside], side="right") - 1, 0, lr.size - 2)
            a, b = lt[idx], lt[idx + 1]
            w = (lx[inside] - lr[idx]) / (lr[idx + 1] - lr[idx])
            with np.errstate(invalid="ignore"):
                smooth = np.exp(a + w * (b - a))
            # a zero right node puts the cell's remaining mass just right of its left end
            out[inside] = np.where(np.isfinite(b), smooth, np.where(np.isfinite(a) & (w <= 0), np.exp(a), 0.0))
        # mass 1 - T(r0) is an atom at 0, so T = tail[0] on [0, r0)
        out[(x >= 0) & (x < self.r[0])] = self.tail[0]
        above = x > self.r[-1]
        if above.any():
            if self.tail[-1] == 0.0 or math.isinf(self.tail_exponent):
                out[above] = 0.0
            elif self.family is not None and not isinstance(self.family, Vanishing):
                f_end = float(self.family.log_value(self.r[-1]))
                out[above] = np.exp(self.family.log_value(x[above]) - f_end) * self.tail[-1]
            else:
                out[above] = self.tail[-1] * (x[above] / self.r[-1]) ** (-self.tail_exponent)
        return out

    def to_dict(self):
        return {
            "r": io.encode_array(self.r),
            "tail": io.encode_array(self.tail),
            "tail_exponent": io.encode_scalar(self.tail_exponent),
            "family": None if self.family is None else self.family.to_dict(),
        }


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _cell_integral(T_other, dist: RadialDistribution, r_out: np.ndarray) -> np.ndarray:
    """int_{[0, r/2]} T_other(r - y) dist(dy) for each r in r_out.

    The atom at 0 contributes (1 - T(r0)) T_other(r).  On each cell the tail
    is exp(a + s (log y - log r_i)), so dist(dy) = -s T(y) dlog y; the integral
    is done by 8-point Gauss-Legendre in log y.
    """
    lr = np.log(dist.r)
    with np.errstate(divide="ignore"):
        lt = np.log(dist.tail)
    out = (1.0 - dist.tail[0]) * T_other(r_out)
    n_cells = dist.r.size - 1
    if r_out.size * n_cells * _GL_X.size > MAX_CELLS:
        raise ConvolutionOverflow(f"{r_out.size * n_cells * _GL_X.size} quadrature cells exceed {MAX_CELLS}")
    for i in range(n_cells):
        a, b = lt[i], lt[i + 1]
        if not np.isfinite(a):
            break
        lo = lr[i]
        if not np.isfinite(b):
            # the cell's remaining mass exp(a) sits at its left end
            sel = r_out / 2 >= dist.r[i]
            out[sel] += math.exp(a) * T_other(r_out[sel] - dist.r[i])
            break
        s = (b - a) / (lr[i + 1] - lr[i])
        hi = np.minimum(lr[i + 1], np.log(r_out / 2))
        sel = hi > lo
        if not sel.any():
            break
        h = hi[sel]
        mid = 0.5 * (h + lo)
        half = 0.5 * (h - lo)
        u = mid[:, None] + half[:, None] * _GL_X[None, :]
        y = np.exp(u)
        dens = -s * np.exp(a + s * (u - lo))
        vals = T_other(r_out[sel][:, None] - y) * dens
        out[sel] += half * (vals @ _GL_W)
    return out


def convolve_tail(d1: RadialDistribution, d2: RadialDistribution, r_out=None) -> np.ndarray:
    """P(X1 + X2 > r) for independent X1 ~ d1, X2 ~ d2, on r_out (default d1.r).

    Uses P(S > r) = int_{[0,r/2]} T1(r-y) F2(dy) + int_{[0,r/2]} T2(r-y) F1(dy)
    + T1(r/2) T2(r/2), which needs T only on [r/2, r] and so involves no
    truncation of the tail beyond the grid.
    """
    r_out = d1.r if r_out is None else np.asarray(r_out, float)
    return (
        _cell_integral(d1.T, d2, r_out)
        + _cell_integral(d2.T, d1, r_out)
        + d1.T(r_out / 2) * d2.T(r_out / 2)
    )


def fold_tails(zeta: RadialDistribution, k: int) -> list:
    """Tails of zeta^{j*} for j = 1..k on zeta's grid."""
    out = [zeta.tail.copy()]
    cur = zeta
    for _ in range(1, k):
        t = np.minimum(np.maximum.accumulate(convolve_tail(cur, zeta)[::-1])[::-1], 1.0)
        out.append(t)
        cur = RadialDistribution(zeta.r, t, zeta.tail_exponent, zeta.family)
    return out


def _analytic_OS(fam):
    if isinstance(fam, PowerLog):
        return "InClass", 2.0
    if isinstance(fam, Stretched):
        return "InClass", 2.0
    if isinstance(fam, Vanishing):
        return "NotInClass", None
    if isinstance(fam, LogWeibull):
        if 0 < fam.alpha < 1:
            return "InClass", 2.0
        if fam.alpha > 1 or (fam.alpha == 1 and fam.beta >= 0):
            return "NotInClass", None
    return None


def classify_OS(zeta: RadialDistribution, *, route: str = "auto") -> ClassificationVerdict:
    """Is zeta * zeta(x > r) of the order zeta(x > r)?

    ell_star is the largest ratio observed over the last three decades (the
    finite-grid proxy of the limsup); the overall maximum is in the evidence.
    """
    if zeta.vanishes():
        conf = "analytic" if isinstance(zeta.family, Vanishing) else "numeric-strong"
        return ClassificationVerdict("NotInClass", conf, {"reason": "bounded support"})
    if route in ("auto", "analytic") and zeta.family is not None:
        a = _analytic_OS(zeta.family)
        if a is not None:
            return ClassificationVerdict(a[0], "analytic", {"family": zeta.family.to_dict()}, a[1])
    if zeta.decades < 6:
        raise GridTooShort(f"grid covers {zeta.decades:.2f} decades; OS needs 6 or a declared family")
    conv = convolve_tail(zeta, zeta)
    pos = zeta.tail > 0
    ratio = np.where(pos, conv / np.where(pos, zeta.tail, 1.0), np.inf)
    lr = np.log(zeta.r)
    last3 = lr >= lr[-1] - 3 * math.log(10)
    lrat = np.log(ratio[last3])
    slope = _slope(lr[last3], lrat) if np.all(np.isfinite(lrat)) else math.inf
    ell = float(np.max(ratio[last3]))
    evidence = {
        "r": zeta.r,
        "ratio": ratio,
        "max_ratio": float(np.max(ratio)),
        "slope_last_3_decades": slope,
    }
    if np.isfinite(ell) and abs(slope) < FLAT_SLOPE:
        conf = "numeric-strong" if ell < 1e3 else "numeric-weak"
        return ClassificationVerdict("InClass", conf, evidence, ell)
    if ell > 1e3 and slope > 0:
        return ClassificationVerdict("NotInClass", "numeric-strong", evidence)
    return ClassificationVerdict("Inconclusive", "numeric-weak", evidence, ell if np.isfinite(ell) else None)


def fold_ratio_bound(zeta: RadialDistribution, ks=(2, 3, 4), eps=0.1) -> dict:
    """Maximum zeta^{k*}/zeta ratios next to (ell_star - 1 + eps)^k."""
    v = classify_OS(zeta, route="numeric")
    tails = fold_tails(zeta, max(ks))
    pos = zeta.tail > 0
    rows = {}
    for k in ks:
        rat = tails[k - 1][pos] / zeta.tail[pos]
        rows[k] = {"max_ratio": float(rat.max()), "envelope": float((v.ell_star - 1 + eps) ** k)}
    return {"ell_star": v.ell_star, "rows": rows}


# --------------------------------------------------------------------------
# tail equivalence and convolution inequalities


def _empirical_tail(a_sorted: np.ndarray, r: np.ndarray):
    n = a_sorted.size
    p = 1.0 - np.searchsorted(a_sorted, r, side="right") / n
    se = np.sqrt(np.maximum(p * (1 - p), 0.0) / n)
    return p, se


def _norms(x):
    x = np.asarray(x, float)
    return np.abs(x.ravel()) if x.ndim == 1 or x.shape[-1] == 1 else np.linalg.norm(x, axis=1)


def check_tail_equivalence(rho_samples, eta_tail: TailFn, *, n_grid=30, band=TRUST_BAND, require_OS=True) -> dict:
    """Empirical P(|X| > r) over eta(|x| > r) in the trusted range.

    The trusted range runs from the 90th to the 99.99th percentile of |X|.
    """
    a = np.sort(_norms(rho_samples))
    if a.size < 10**4:
        raise InsufficientSamples(f"{a.size} samples; at least 10^4 are required")
    if not np.any(eta_tail.values > 0):
        raise PreconditionFailed("eta is the zero measure")
    if require_OS:
        v = classify_OS(RadialDistribution.from_tailfn(eta_tail))
        if not v.in_class:
            raise PreconditionFailed(f"normalized eta tail is not in OS ({v.verdict})")
    lo, hi = np.quantile(a, [0.90, 0.9999])
    r = np.geomspace(lo, hi, n_grid)
    p, se = _empirical_tail(a, r)
    eta = np.asarray(eta_tail(r), float)
    if np.any(eta <= 0):
        raise PreconditionFailed("eta tail vanishes inside the trusted range")
    ratio = p / eta
    return {
        "r": r,
        "empirical": p,
        "std_error": se,
        "eta": eta,
        "ratio": ratio,
        "min_ratio": float(ratio.min()),
        "max_ratio": float(ratio.max()),
        "band": list(band),
        "violation": bool(ratio.min() < band[0] or ratio.max() > band[1]),
    }


def convolution_inequalities(rho1_samples, rho2_samples, *, n_grid=50, n_se=3.0) -> dict:
    """Empirical check of the two convolution-tail inequalities.

    (i)  P(|X1 + X2| > r) <= P(|X1| + |X2| > r);
    (ii) P(|X1| > r) <= c1 P(|X1 + X2| > r - s), s the 10th percentile of |X2|
         and c1 = 1/P(|X2| <= s).
    Each point passes when the left side exceeds the right by at most
    ``n_se`` combined binomial standard errors.
    """
    x1 = np.asarray(rho1_samples, float)
    x2 = np.asarray(rho2_samples, float)
    if x1.ndim == 1:
        x1, x2 = x1[:, None], x2[:, None] if x2.ndim == 1 else x2
    if x2.ndim == 1:
        x2 = x2[:, None]
    n = min(len(x1), len(x2))
    if n < 10**5:
        raise InsufficientSamples(f"{n} paired samples; at least 10^5 are required")
    x1, x2 = x1[:n], x2[:n]
    a1 = _norms(x1)
    a2 = _norms(x2)
    a_sum = _norms(x1 + x2)
    zsum = a1 + a2
    s = float(np.quantile(a2, 0.10))
    c1 = 1.0 / float(np.mean(a2 <= s))
    lo, hi = np.quantile(a1, [0.5, 0.999])
    lo = max(lo, 1e-300)
    r = np.geomspace(lo, max(hi, lo * 1.0001), n_grid) + s
    as_, ezs = np.sort(a_sum), np.sort(zsum)
    sa1 = np.sort(a1)
    p_sum, se_sum = _empirical_tail(as_, r)
    p_z, se_z = _empirical_tail(ezs, r)
    ok_i = p_sum <= p_z + n_se * np.sqrt(se_sum**2 + se_z**2)
    p1, se1 = _empirical_tail(sa1, r)
    p_shift, se_shift = _empirical_tail(as_, r - s)
    ok_ii = p1 <= c1 * p_shift + n_se * np.sqrt(se1**2 + (c1 * se_shift) ** 2)
    return {
        "r": r,
        "s": s,
        "c1": c1,
        "part_i": {"lhs": p_sum, "rhs": p_z, "pass": ok_i},
        "part_ii": {"lhs": p1, "rhs": c1 * p_shift, "pass": ok_ii},
        "all_pass_i": bool(ok_i.all()),
        "all_pass_ii": bool(ok_ii.all()),
        "all_pass": bool(ok_i.all() and ok_ii.all()),
    }


def check_theorem_3_2(spec: ProcessSpec, *, n_mc=10**6, rng=None, n_grid=25, band=TRUST_BAND, l=1) -> dict:
    """G_1, K and L on a shared grid, with pairwise ratio ranges.

    G_1 is estimated by Monte Carlo from rho_1 samples; the shared grid is
    the trusted range of those samples (90th to 99.99th percentile).
    """
    from .rng import as_stream
    from .sampler import IncrementLaw, sample_rho_l

    Kf = K_tailfn(spec)
    v = classify_OR(Kf)
    if not v.in_class:
        raise PreconditionFailed(f"K is not in OR ({v.verdict}, {v.confidence})")
    stream = as_stream(rng)
    xi = sample_rho_l(IncrementLaw.default(spec, l), stream.child("G1"), n_mc)
    a = np.sort(_norms(xi))
    lo, hi = np.quantile(a, [0.90, 0.9999])
    r = np.geomspace(lo, hi, n_grid)
    G1, G1_se = _empirical_tail(a, r)
    K = np.asarray(spec.K(r), float)
    L = np.array([L_of_r(spec, float(ri), n_mc=n_mc, rng=stream.child("L", i))[0] for i, ri in enumerate(r)])
    ratios = {"G1/K": G1 / K, "K/L": K / L, "G1/L": G1 / L}
    rng_rep = {k: [float(np.min(v_)), float(np.max(v_))] for k, v_ in ratios.items()}
    out = {
        "r": r,
        "G1": G1,
        "G1_std_error": G1_se,
        "K": K,
        "L": L,
        "ratios": ratios,
        "ratio_ranges": rng_rep,
        "band": list(band),
        "violation": any(lo_ < band[0] or hi_ > band[1] for lo_, hi_ in rng_rep.values()),
        "K_OR_verdict": v.to_dict(),
    }
    if spec.has_density:
        M = np.asarray(M_of_r(spec, r), float)
        rm = L / (r**spec.d * M)
        out["L/(r^d M)"] = rm
        out["L/(r^d M)_range"] = [float(rm.min()), float(rm.max())]
    return out
