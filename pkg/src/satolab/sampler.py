"""Samplers for mu = law of X(1), the increment laws rho_l, the geometric-clock
sequence Y(n) = X(e^{ln}), and Brownian hitting / last-exit time processes.

rho_l is the law of X(1) - X(e^{-l}).  With b = e^{-lH} its characteristic
function is mu^(z) / mu^(b z), so its Lévy measure has the radial density
(k(r) - k(r / b)) / r and its Gaussian part is (1 - b^2) A.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import io
from .errors import HorizonTooShort, InvalidCutoff, RouteUnavailable
from .levy_core import Custom, DilatedKernel, Kernel, ProcessSpec, Stable, StepKernel, TabulatedKernel, quad
from .rng import Stream, as_stream, batches

MAX_POISSON_MEAN = 1e7
DEFAULT_RATE = 1e4
BATCH = 4096
MAX_JUMPS_PER_CHUNK = 4_000_000


# --------------------------------------------------------------------------
# radial jump tables


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_SUB = 12


def _step_parts(k: Kernel):
    """(log breaks, log values, log scale) when k is a possibly dilated step kernel."""
    lam = 1.0
    base = k
    while isinstance(base, DilatedKernel):
        lam *= base.lam
        base = base.base
    if isinstance(base, StepKernel):
        return np.log(base.breaks) + math.log(lam), base.log_values
    return None


def log_eta_tails(k: Kernel, span: float, r) -> np.ndarray:
    """log int_r^{r e^span} k(s)/s ds for one kernel, vectorized over r.

    Step kernels are integrated exactly cell by cell; other kernels by
    composite 16-point Gauss-Legendre in log s, scaled by k(r) so that
    astronomically small kernels stay representable.
    """
    u = np.log(np.atleast_1d(np.asarray(r, float)))
    if u.size > 256:
        return np.concatenate([log_eta_tails(k, span, np.exp(u[i : i + 256])) for i in range(0, u.size, 256)])
    parts = _step_parts(k)
    if parts is not None:
        lb, lv = parts
        lo = np.concatenate([[-np.inf], lb])
        hi = np.concatenate([lb, [np.inf]])
        ov = np.minimum(u[:, None] + span, hi[None, :]) - np.maximum(u[:, None], lo[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(ov > 0, lv[None, :] + np.log(np.where(ov > 0, ov, 1.0)), -np.inf)
        m = np.max(terms, axis=1)
        with np.errstate(invalid="ignore"):
            out = m + np.log(np.sum(np.exp(terms - np.where(np.isfinite(m), m, 0.0)[:, None]), axis=1))
        return np.where(np.isfinite(m), out, -np.inf)
    end = k.support_end()
    b = u + span
    if math.isfinite(end):
        b = np.minimum(b, math.log(end))
    width = np.maximum(b - u, 0.0)
    h = width / _SUB
    starts = u[:, None] + h[:, None] * np.arange(_SUB)[None, :]
    nodes = (starts[:, :, None] + 0.5 * h[:, None, None] * (1 + _GL_X[None, None, :])).reshape(u.size, -1)
    la = np.asarray(k.log_value(np.exp(u)), float)
    lk = np.asarray(k.log_value(np.exp(nodes)), float).reshape(nodes.shape)
    w = np.tile(_GL_W, _SUB)[None, :] * 0.5 * h[:, None]
    safe = np.where(np.isfinite(la), la, 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.sum(w * np.exp(lk - safe[:, None]), axis=1)
        out = safe + np.log(val)
    return np.where(np.isfinite(la) & (val > 0), out, -np.inf)


def _log_eta_tail(k: Kernel, span: float, r: float) -> float:
    return float(log_eta_tails(k, span, np.array([r]))[0])


@dataclass(frozen=True, eq=False)
class RadialTable:
    """Tail T(r) = int_r^{r/b} k(s)/s ds of one atom's jump law, for r >= eps.

    Inversion interpolates log r against log T; beyond the last node the tail
    continues with its end slope, or stops at the kernel's support end.
    """

    lr: np.ndarray
    lT: np.ndarray
    end_slope: float
    support_end: float

    @classmethod
    def build(cls, k: Kernel, span: float, eps: float, n: int = 400) -> "RadialTable":
        end = k.support_end()
        r_hi = min(end, 1e250) if math.isfinite(end) else 1e250
        lr = np.linspace(math.log(eps), math.log(r_hi), n)
        if math.isfinite(end):
            lr = np.unique(np.concatenate([lr, np.log(k.breakpoints()[k.breakpoints() > eps])]))
            lr = lr[lr <= math.log(end)]
        lT = log_eta_tails(k, span, np.exp(lr))
        # refine cells where log T visibly bends against log r
        fin = np.isfinite(lT)
        bend = np.zeros(lr.size - 1, dtype=bool)
        if fin.sum() >= 3:
            with np.errstate(invalid="ignore"):
                curv = np.abs(np.diff(lT, 2))
            hot = np.flatnonzero(~np.isfinite(curv) | (curv > 1e-4))
            bend[np.clip(hot, 0, bend.size - 1)] = True
            bend[np.clip(hot + 1, 0, bend.size - 1)] = True
        bend &= fin[:-1] & (lT[:-1] > lT[0] - 700)
        if bend.any():
            cells = np.flatnonzero(bend)
            extra = np.concatenate([np.linspace(lr[c], lr[c + 1], int(math.ceil((lr[c + 1] - lr[c]) / 0.01)) + 1)[1:-1] for c in cells])
            lT_extra = log_eta_tails(k, span, np.exp(extra))
            order = np.argsort(np.concatenate([lr, extra]))
            lr = np.concatenate([lr, extra])[order]
            lT = np.concatenate([lT, lT_extra])[order]
        keep = np.isfinite(lT) & (lT > lT[0] - 700)
        lr_k, lT_k = lr[keep], lT[keep]
        # enforce strict decrease for interpolation
        lT_k = np.minimum.accumulate(lT_k)
        uniq = np.concatenate([[True], np.diff(lT_k) < 0])
        lr_k, lT_k = lr_k[uniq], lT_k[uniq]
        if lr_k.size >= 2:
            slope = float((lT_k[-1] - lT_k[-2]) / (lr_k[-1] - lr_k[-2]))
        else:
            slope = -math.inf
        return cls(lr_k, lT_k, min(slope, -1e-3), end)

    @property
    def log_total(self) -> float:
        return float(self.lT[0])

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Radii with P(R > r) = T(r) / T(eps), from uniforms u in (0, 1]."""
        target = self.lT[0] + np.log(u)
        inside = target >= self.lT[-1]
        out = np.empty(target.shape)
        out[inside] = np.interp(-target[inside], -self.lT, self.lr)
        beyond = ~inside
        if beyond.any():
            if math.isfinite(self.support_end) or self.lr.size < 2:
                # remaining mass sits in the last cell before the support end
                top = math.log(self.support_end) if math.isfinite(self.support_end) else self.lr[-1]
                out[beyond] = top - 1e-12
            else:
                out[beyond] = self.lr[-1] + (target[beyond] - self.lT[-1]) / self.end_slope
        return np.exp(out)


# --------------------------------------------------------------------------
# increment laws


ROUTES = ("Exact", "CompoundPoissonPlusGaussian", "Unavailable")


@dataclass(frozen=True, eq=False)
class IncrementLaw:
    spec: ProcessSpec
    l: int = 1
    route: str = "Exact"
    epsilon: float | None = None
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ValueError("l must be a positive integer")
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")
        if self.route == "Exact" and not exact_rho_available(self.spec):
            raise RouteUnavailable(f"no exact sampler for rho_l of {self.spec.marginal.name}")
        if self.route == "CompoundPoissonPlusGaussian":
            if self.spec.is_gaussian():
                raise RouteUnavailable("a zero Lévy measure needs the exact Gaussian route")
            if self.epsilon is not None:
                _validate_cutoff(self.spec, self.epsilon)

    @classmethod
    def default(cls, spec: ProcessSpec, l: int = 1, epsilon=None, rate=DEFAULT_RATE) -> "IncrementLaw":
        if exact_rho_available(spec) and epsilon is None:
            return cls(spec, l, "Exact")
        return cls(spec, l, "CompoundPoissonPlusGaussian", epsilon, rate)

    @property
    def b(self) -> float:
        return math.exp(-self.l * self.spec.H)

    def plan(self) -> "CompoundPoissonPlan":
        return _plan(self)

    def to_dict(self):
        out = {"l": self.l, "route": self.route, "approximate_profile": bool(self.spec.marginal.approximate_profile)}
        if self.route == "CompoundPoissonPlusGaussian":
            p = self.plan()
            out.update({"epsilon": p.epsilon, "poisson_mean": p.poisson_mean})
        return out


def exact_rho_available(spec: ProcessSpec) -> bool:
    return isinstance(spec.marginal, Stable) or spec.is_gaussian()


def _knee(spec: ProcessSpec) -> float:
    """Lower end of the profile's tabulated range (inf when not tabulated)."""
    knees = []
    for k in spec.profile().kernels:
        base = k
        lam = 1.0
        while hasattr(base, "base"):
            lam *= base.lam
            base = base.base
        if isinstance(base, TabulatedKernel):
            knees.append(float(base.r[0]) * lam)
    return min(knees) if knees else math.inf


def _poisson_mean(spec: ProcessSpec, span: float, eps: float) -> float:
    prof = spec.profile()
    tot = 0.0
    for w, k in zip(prof.directions.weights, prof.kernels):
        if not k.is_zero():
            tot += w * math.exp(_log_eta_tail(k, span, eps))
    return tot


def _validate_cutoff(spec, eps):
    if not eps > 0:
        raise InvalidCutoff("epsilon must be positive")
    if eps >= _knee(spec):
        raise InvalidCutoff(f"epsilon {eps} is not below the tabulated profile's lower knee {_knee(spec)}")


def default_epsilon(spec: ProcessSpec, l: int = 1, rate: float = DEFAULT_RATE) -> float:
    """Cutoff giving a Poisson mean close to ``rate`` jumps per sample.

    When the Lévy measure of rho_l is finite with mass below ``rate`` the
    cutoff is placed far below every scale of the profile.
    """
    span = l * spec.H
    knee = _knee(spec)
    floor = 1e-12 * (knee if math.isfinite(knee) else 1.0)
    if _poisson_mean(spec, span, floor) <= rate:
        return floor
    lo, hi = math.log(floor), math.log(min(knee, 1e6)) if math.isfinite(knee) else math.log(1e6)
    if _poisson_mean(spec, span, math.exp(hi)) > rate:
        return math.exp(hi) * (1 - 1e-9)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _poisson_mean(spec, span, math.exp(mid)) > rate:
            lo = mid
        else:
            hi = mid
    return math.exp(hi)


@dataclass(frozen=True, eq=False)
class CompoundPoissonPlan:
    epsilon: float
    poisson_mean: float
    atom_probs: np.ndarray
    tables: tuple
    xi: np.ndarray
    shift: np.ndarray
    cov: np.ndarray
    chol: np.ndarray


def _moment(k: Kernel, span: float, a: float, b: float, power: int) -> float:
    """int_a^b r^power (k(r) - k(r e^span)) dr / r, a >= 0."""
    if b <= a:
        return 0.0
    la = math.log(a) if a > 0 else math.log(b) - 60.0
    lb = math.log(b)

    def f(u):
        r = math.exp(u)
        return r**power * (float(k(r)) - float(k(r * math.exp(span))))

    pieces = np.linspace(la, lb, max(2, int(lb - la) + 1))
    return float(sum(quad(f, x0, x1, strict=False) for x0, x1 in zip(pieces[:-1], pieces[1:])))


@lru_cache(maxsize=64)
def _plan_cached(spec: ProcessSpec, l: int, eps: float | None, rate: float) -> CompoundPoissonPlan:
    span = l * spec.H
    b = math.exp(-span)
    eps = default_epsilon(spec, l, rate) if eps is None else eps
    prof = spec.profile()
    d = spec.d
    tables, masses, xis = [], [], []
    small_mean = np.zeros(d)
    comp = np.zeros(d)
    cov = (1 - b * b) * spec.A()
    for xi, w, k in zip(prof.directions.xi, prof.directions.weights, prof.kernels):
        if k.is_zero():
            continue
        t = RadialTable.build(k, span, eps)
        tables.append(t)
        masses.append(w * math.exp(t.log_total))
        xis.append(xi)
        cov = cov + w * np.outer(xi, xi) * _moment(k, span, 0.0, eps, 2)
        small_mean += w * xi * _moment(k, span, 0.0, eps, 1)
        if eps < 1:
            comp += w * xi * _moment(k, span, eps, 1.0, 1)
        else:
            comp -= w * xi * _moment(k, span, 1.0, eps, 1)
    mean = float(sum(masses))
    if mean > MAX_POISSON_MEAN:
        raise InvalidCutoff(f"epsilon {eps} gives Poisson mean {mean:.3g} > {MAX_POISSON_MEAN:.0e}")
    if isinstance(spec.marginal, Custom):
        # generating triplet with truncation 1{|x| <= 1}
        gam = spec.gamma()
        big = np.zeros(d)
        for xi, w, k in zip(prof.directions.xi, prof.directions.weights, prof.kernels):
            if not k.is_zero():
                big += w * xi * _moment_k(k, 1.0, 1.0 / b)
        shift = (1 - b) * gam - b * big - comp
    elif spec.marginal.support == "R+":
        # subordinator: zero drift without truncation, small jumps by their mean
        shift = small_mean
    else:
        # symmetric profiles: compensation vanishes by symmetry
        shift = -comp
    cov = 0.5 * (cov + cov.T)
    try:
        chol = np.linalg.cholesky(cov + 1e-300 * np.eye(d))
    except np.linalg.LinAlgError:
        w_, v_ = np.linalg.eigh(cov)
        chol = v_ * np.sqrt(np.maximum(w_, 0.0))
    probs = np.array(masses) / mean
    return CompoundPoissonPlan(eps, mean, probs, tuple(tables), np.array(xis), shift, cov, chol)


def _moment_k(k: Kernel, a: float, b: float) -> float:
    """int_a^b k(r) dr."""
    return quad(lambda u: math.exp(u) * float(k(math.exp(u))), math.log(a), math.log(b), strict=False)


def _plan(law: IncrementLaw) -> CompoundPoissonPlan:
    return _plan_cached(law.spec, int(law.l), law.epsilon, float(law.rate))


def _sample_cp(plan: CompoundPoissonPlan, gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    out = np.tile(plan.shift, (n, 1))
    if np.any(plan.cov):
        out += gen.standard_normal((n, d)) @ plan.chol.T
    chunk = max(1, int(MAX_JUMPS_PER_CHUNK / max(plan.poisson_mean, 1.0)))
    for s in range(0, n, chunk):
        m = min(n, s + chunk) - s
        counts = gen.poisson(plan.poisson_mean, m)
        total = int(counts.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(m), counts)
        atom = gen.choice(len(plan.tables), size=total, p=plan.atom_probs) if len(plan.tables) > 1 else np.zeros(total, int)
        u = 1.0 - gen.random(total)
        radii = np.empty(total)
        for j, t in enumerate(plan.tables):
            sel = atom == j
            if sel.any():
                radii[sel] = t.sample(u[sel])
        jumps = radii[:, None] * plan.xi[atom]
        for c in range(d):
            out[s : s + m, c] += np.bincount(owner, weights=jumps[:, c], minlength=m)
    return out


def sample_rho_l(law: IncrementLaw, rng, count: int) -> np.ndarray:
    """``count`` i.i.d. draws of rho_l, shape (count, d)."""
    spec = law.spec
    d = spec.d
    if count == 0:
        return np.empty((0, d))
    if law.route == "Unavailable":
        raise RouteUnavailable("increment law has no sampling route")
    gen = as_stream(rng).generator()
    b = law.b
    if law.route == "Exact":
        if spec.is_gaussian():
            A = (1 - b * b) * spec.A()
            L = np.linalg.cholesky(A + 1e-300 * np.eye(d))
            return (1 - b) * spec.gamma() + gen.standard_normal((count, d)) @ L.T
        m: Stable = spec.marginal
        factor = (1 - b**m.alpha) ** (1 / m.alpha) * spec.dilation
        return m.sample(gen, count, d, scale_factor=factor)
    return _sample_cp(law.plan(), gen, count, d)


# --------------------------------------------------------------------------
# marginals and sequences


def series_depth(H: float, iqr: float, series_tol: float) -> int:
    """Smallest N with e^{-NH} iqr < series_tol."""
    if iqr <= series_tol:
        return 0
    return int(math.ceil(math.log(iqr / series_tol) / H))


def _iqr(x: np.ndarray) -> float:
    a = np.linalg.norm(x, axis=1) if x.shape[1] > 1 else x[:, 0]
    q1, q3 = np.quantile(a, [0.25, 0.75])
    return float(q3 - q1)


def sample_marginal(spec: ProcessSpec, rng, count: int, series_tol: float = 1e-3, route: str = "auto",
                    law: IncrementLaw | None = None, return_depth: bool = False):
    """``count`` draws of X(1).

    route 'exact' uses the marginal's closed-form sampler, 'series' uses
    X(1) = sum_n e^{-nH} xi_n with xi_n ~ rho_1, truncated at depth N with
    e^{-NH} IQR(rho_1) < series_tol; 'auto' prefers the exact sampler.
    """
    stream = as_stream(rng)
    d = spec.d
    if route not in ("auto", "exact", "series"):
        raise ValueError(f"unknown route {route!r}")
    exact_ok = spec.marginal.exact_mu and not isinstance(spec.marginal, Custom)
    if route == "exact" and not exact_ok:
        raise RouteUnavailable(f"{spec.marginal.name} has no exact sampler for mu")
    if route == "exact" or (route == "auto" and exact_ok):
        x = spec.dilation * spec.marginal.sample(stream.child("mu").generator(), count, d) if count else np.empty((0, d))
        return (x, 0) if return_depth else x
    law = IncrementLaw.default(spec, 1) if law is None else law
    if law.l != 1:
        raise ValueError("the series representation uses rho_1")
    pilot = sample_rho_l(law, stream.child("pilot"), 4000)
    N = series_depth(spec.H, _iqr(pilot), series_tol)
    x = np.zeros((count, d))
    for n in range(N + 1):
        x += math.exp(-n * spec.H) * sample_rho_l(law, stream.child("term", n), count)
    return (x, N) if return_depth else x


@dataclass(frozen=True, eq=False)
class PathSample:
    """Y(0..N) for one or more paths; values have shape (paths, N + 1, d)."""

    H: float
    l: int
    n_steps: int
    values: np.ndarray
    seed: str
    truncation_depth: int = 0
    increment_route: dict = field(default_factory=dict)

    @property
    def paths(self) -> int:
        return self.values.shape[0]

    def normalized(self) -> np.ndarray:
        """Y(n) / e^{lnH}."""
        n = np.arange(self.n_steps + 1)
        return self.values / np.exp(self.l * n * self.H)[None, :, None]

    def to_columns(self) -> np.ndarray:
        """One row per step: n followed by every path's Y components."""
        n = np.arange(self.n_steps + 1, dtype=float)[:, None]
        body = np.transpose(self.values, (1, 0, 2)).reshape(self.n_steps + 1, -1)
        return np.hstack([n, body])

    def write(self, path):
        hdr = f"n then Y components for {self.paths} paths of dimension {self.values.shape[2]}; H={self.H} l={self.l} seed={self.seed}"
        return io.write_columnar(path, self.to_columns(), hdr)

    @classmethod
    def read(cls, path, H, l, paths, d, seed=""):
        cols = io.read_columnar(path, ncols=1 + paths * d)
        vals = cols[:, 1:].reshape(cols.shape[0], paths, d).transpose(1, 0, 2)
        return cls(H, l, cols.shape[0] - 1, vals, seed)

    def meta(self):
        return {"H": self.H, "l": self.l, "n_steps": self.n_steps, "paths": self.paths,
                "seed": self.seed, "truncation_depth": self.truncation_depth, "increment_route": self.increment_route}


def _run_batches(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def simulate_sequence(spec: ProcessSpec, rng, N: int, l: int = 1, paths: int = 1, series_tol: float = 1e-3,
                      epsilon=None, threads: int = 1, batch_size: int = BATCH) -> PathSample:
    """Y(0) ~ mu and Y(n) = Y(n-1) + e^{lnH} xi_n with xi_n i.i.d. rho_l.

    Paths are split into fixed batches, each with its own stream keyed by
    (seed, batch, step), so the output does not depend on ``threads``.
    """
    if N < 0 or int(N) != N:
        raise ValueError("N must be a nonnegative integer")
    stream = as_stream(rng)
    law = IncrementLaw.default(spec, l, epsilon)
    d = spec.d
    depth = [0]

    def run(item):
        b, s, e = item
        m = e - s
        bs = stream.child("batch", b)
        y0, dep = sample_marginal(spec, bs.child("y0"), m, series_tol, return_depth=True,
                                  law=None if l == 1 and epsilon is None else IncrementLaw.default(spec, 1, epsilon))
        depth[0] = max(depth[0], dep)
        out = np.empty((m, N + 1, d))
        out[:, 0] = y0
        for n in range(1, N + 1):
            xi = sample_rho_l(law, bs.child("xi", n), m)
            out[:, n] = out[:, n - 1] + math.exp(l * n * spec.H) * xi
        return out

    parts = _run_batches(run, list(batches(paths, batch_size)), threads)
    vals = np.concatenate(parts, axis=0) if parts else np.empty((0, N + 1, d))
    route = {"route": law.route, "approximate_profile": bool(spec.marginal.approximate_profile)}
    if law.route == "CompoundPoissonPlusGaussian":
        p = law.plan()
        route.update({"epsilon": p.epsilon, "poisson_mean": p.poisson_mean})
    return PathSample(spec.H, l, int(N), vals, stream.label(), depth[0], route)


def increments(sample: PathSample) -> np.ndarray:
    """xi_n = (Y(n) - Y(n-1)) / e^{lnH}, shape (paths, N, d)."""
    n = np.arange(1, sample.n_steps + 1)
    return np.diff(sample.values, axis=1) / np.exp(sample.l * n * sample.H)[None, :, None]


# --------------------------------------------------------------------------
# Brownian hitting and last-exit times


@dataclass(frozen=True, eq=False)
class BesselTimes:
    mode: str
    bm_dim: int
    radii: np.ndarray
    times: np.ndarray  # (paths, radii); inf = not reached before the time cap
    dt: float
    horizon: float | None
    return_probability: float | None
    seed: str

    def to_columns(self):
        return np.hstack([np.arange(self.times.shape[0], dtype=float)[:, None], self.times])

    def write(self, path):
        hdr = f"path then {self.mode} times at radii " + " ".join(io.fmt_float(r) for r in self.radii)
        return io.write_columnar(path, self.to_columns(), hdr)

    def meta(self):
        return {"mode": self.mode, "bm_dim": self.bm_dim, "radii": self.radii, "dt": self.dt,
                "horizon": self.horizon, "return_probability": self.return_probability, "seed": self.seed}


REFINE_LEVELS = 3


def _step_sizes(gap: np.ndarray, dt: float) -> np.ndarray:
    """dt, divided by 4 while the walk is within 2 sqrt(dt) of the target."""
    h = np.full(gap.shape, dt)
    for _ in range(REFINE_LEVELS):
        near = gap < 2 * np.sqrt(h)
        h = np.where(near, h / 4, h)
    return h


def _hit_batch(gen, m, d, radii, dt, t_cap):
    times = np.full((m, radii.size), np.inf)
    pos = np.zeros((m, d))
    t = np.zeros(m)
    nxt = np.zeros(m, dtype=int)
    active = np.arange(m)
    while active.size:
        p = pos[active]
        rad = np.sqrt(np.einsum("ij,ij->i", p, p))
        h = _step_sizes(radii[nxt[active]] - rad, dt)
        p = p + gen.standard_normal(p.shape) * np.sqrt(h)[:, None]
        pos[active] = p
        t[active] += h
        rad = np.sqrt(np.einsum("ij,ij->i", p, p))
        crossed = rad[:, None] >= radii[None, :]
        new = crossed & ~np.isfinite(times[active])
        if new.any():
            ti = times[active]
            ti[new] = np.broadcast_to(t[active][:, None], ti.shape)[new]
            times[active] = ti
            nxt[active] = np.maximum(nxt[active], np.minimum(crossed.sum(axis=1), radii.size - 1))
        done = np.isfinite(times[active, -1]) | (t[active] >= t_cap)
        active = active[~done]
    return times


def _last_exit_batch(gen, m, d, radii, dt, horizon, extend):
    """Last monitored time inside each ball before the horizon.

    Far from every sphere the step grows to (gap / 6)^2, which keeps the
    chance of an unmonitored crossing per step below 1e-8; BM increments are
    exact, so only monitoring is affected.
    """
    last = np.zeros((m, radii.size))
    pos = np.zeros((m, d))
    t = np.zeros(m)
    r_max = radii[-1]
    T = horizon
    while True:
        active = np.flatnonzero(t < T)
        while active.size:
            p = pos[active]
            rad = np.sqrt(np.einsum("ij,ij->i", p, p))
            gap = np.min(np.abs(rad[:, None] - radii[None, :]), axis=1)
            h = np.maximum(_step_sizes(gap, dt), np.where(gap > 12 * math.sqrt(dt), (gap / 6) ** 2, 0.0))
            h = np.minimum(h, T - t[active])
            p = p + gen.standard_normal(p.shape) * np.sqrt(h)[:, None]
            pos[active] = p
            t[active] += h
            rad = np.sqrt(np.einsum("ij,ij->i", p, p))
            inside = rad[:, None] <= radii[None, :]
            la = last[active]
            la[inside] = np.broadcast_to(t[active][:, None], la.shape)[inside]
            last[active] = la
            active = active[t[active] < T - 1e-12 * T]
        rad = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        p_ret = float(np.mean(np.minimum(1.0, (r_max / np.maximum(rad, 1e-300)) ** (d - 2))))
        if p_ret < 0.01 or not extend:
            return last, T, p_ret
        T *= 2


def simulate_bessel_times(bm_dim: int, mode: str, radii, rng, dt: float = 1e-4, paths: int = 1000,
                          t_max: float | None = None, t_cap: float | None = None, threads: int = 1,
                          batch_size: int = BATCH) -> BesselTimes:
    """Hitting times T_r or last-exit times L_r of |B| for d-dimensional BM.

    Hit: the walk runs until |B| reaches max(radii) or time ``t_cap``
    (unreached radii are inf).  LastExit: the horizon starts at
    max(100 r_max^2, t_max) and doubles until the estimated return
    probability mean (r_max / |B(T)|)^{d-2} is below 0.01; a user ``t_max``
    that fails this check raises HorizonTooShort.
    """
    radii = np.sort(np.asarray(radii, float).ravel())
    if radii.size == 0 or radii[0] <= 0:
        raise ValueError("radii must be positive")
    if int(bm_dim) != bm_dim or bm_dim < 2:
        raise ValueError("bm_dim must be an integer >= 2")
    if mode not in ("Hit", "LastExit"):
        raise ValueError("mode must be Hit or LastExit")
    if mode == "LastExit" and bm_dim < 3:
        raise ValueError("last exit times need bm_dim >= 3 (transience)")
    stream = as_stream(rng).child("bessel", mode)
    d = int(bm_dim)
    items = list(batches(paths, batch_size))
    if mode == "Hit":
        cap = math.inf if t_cap is None else t_cap

        def run(item):
            b, s, e = item
            return _hit_batch(stream.child(b).generator(), e - s, d, radii, dt, cap)

        parts = _run_batches(run, items, threads)
        times = np.concatenate(parts) if parts else np.empty((0, radii.size))
        return BesselTimes(mode, d, radii, times, dt, None, None, stream.label())

    horizon = max(100 * radii[-1] ** 2, t_max or 0.0)
    user = t_max is not None

    def run(item):
        b, s, e = item
        return _last_exit_batch(stream.child(b).generator(), e - s, d, radii, dt, horizon, not user)

    parts = _run_batches(run, items, threads)
    times = np.concatenate([p[0] for p in parts])
    T_used = max(p[1] for p in parts)
    p_ret = float(np.average([p[2] for p in parts], weights=[e - s for _, s, e in items]))
    if p_ret >= 0.01:
        raise HorizonTooShort(f"estimated return probability {p_ret:.3g} after T = {T_used:.3g} is not below 0.01")
    return BesselTimes(mode, d, radii, times, dt, T_used, p_ret, stream.label())
