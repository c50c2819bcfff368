"""Normalizing functions g, generalized inverses, submultiplicativity, Young
conjugates, and the two explicit constructions (g from a tail, K from g).

A g-function is positive, nondecreasing and unbounded on [0, inf); the
generalized inverse is g^{-1}(x) = sup{y : g(y) < x} with sup of the empty
set equal to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import (
    BudgetExceeded,
    HypothesisViolated,
    NotConstructible,
    QValidationFailed,
    SpecError,
)
from .levy_core import DirectionMeasure, LevyProfile, StepKernel, TailFn, quad
from .special import log_sub

E = math.e


def _tower(n: int) -> float:
    """exp applied n times to 1 (so log_{(n)} of it equals 1)."""
    x = 1.0
    for _ in range(n):
        x = math.exp(x)
    return x


def _iterlog(x, k):
    out = np.asarray(x, dtype=float)
    for _ in range(k):
        out = np.log(out)
    return out


@dataclass(frozen=True)
class GAsymptotics:
    """Growth descriptors used by the analytic integral and moment tests.

    theta: lim log g(x) / log x (0 for log-type, inf for exponential);
    exps: exponents e_k with g(x) of the order prod_k (log_{(k)} x)^{e_k},
    log_{(0)} x = x, when g is of iterated power-log type.
    """

    theta: float
    exps: tuple | None = None


@dataclass(frozen=True)
class InverseClass:
    """Asymptotic class of g^{-1}.

    kind 'poly':      g^{-1}(x) of the order x^p (log x)^q prod_k (log_{(k+2)} x)^{more[k]}
    kind 'exp':       log g^{-1}(x) ~ c x^a (log x)^b (log log x)^e
    kind 'logquad':   log g^{-1}(x) ~ c (log x)^2
    """

    kind: str
    c: float = 1.0
    a: float = 0.0
    b: float = 0.0
    e: float = 0.0
    p: float = 0.0
    q: float = 0.0
    more: tuple = ()

    @property
    def log_exponents(self) -> tuple:
        """Exponents of (x, log x, log_{(2)} x, ...) for the poly kind."""
        return (self.p, self.q, *self.more)

    @property
    def in_OR(self) -> bool:
        """Whether g^{-1}(x) + log x belongs to OR."""
        return self.kind == "poly"

    @property
    def submultiplicative(self) -> bool | None:
        if self.kind == "poly":
            return True
        if self.kind == "logquad":
            return True
        if self.kind == "exp":
            if self.a < 1:
                return True
            if self.a == 1:
                return self.b < 0 or (self.b == 0 and self.e <= 0)
            return False
        return None


class GFunction:
    """Base class; subclasses supply ``_log_g`` (or ``__call__``) and metadata."""

    family = "gfunction"
    x0 = 0.0  # g is constant on [0, x0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):  # g beyond float range is inf
            out = np.exp(self._log_g(np.maximum(x, self.x0)))
        return out if out.ndim else float(out)

    def _log_g(self, x):
        raise NotImplementedError

    def inverse(self, y):
        return numeric_inverse(self, y)

    def log_inverse(self, y):
        with np.errstate(divide="ignore"):
            return np.log(self.inverse(y))

    def asymptotics(self) -> GAsymptotics | None:
        return None

    def inverse_class(self) -> InverseClass | None:
        return None

    def rescaled(self, a: float) -> "GFunction":
        """The function x -> g(a x)."""
        return Rescaled(self, a) if a != 1.0 else self

    @property
    def base(self) -> "GFunction":
        return self

    def params(self) -> dict:
        return {k: getattr(self, k) for k in getattr(self, "__dataclass_fields__", {})}

    def to_dict(self):
        return {"family": self.family, **{k: io.encode_scalar(v) for k, v in self.params().items()}}

    @staticmethod
    def from_dict(doc) -> "GFunction":
        doc = dict(doc)
        cls = G_FAMILIES[doc.pop("family")]
        return cls._from_params(doc)

    @classmethod
    def _from_params(cls, doc):
        return cls(**{k: io.decode_scalar(v) for k, v in doc.items()})

    def check(self, grid=None) -> dict:
        """Class G_1 invariants on a probe grid."""
        grid = np.concatenate([[0.0], np.geomspace(1e-3, 1e12, 400)]) if grid is None else grid
        with np.errstate(over="ignore"):
            v = np.asarray(self(grid), dtype=float)
        positive = bool(np.all(v[1:] > 0) and (v[0] > 0 or self.x0 == 0.0))
        # comparison rather than differences, so overflow to inf stays ordered
        increasing = bool(np.all(v[1:] >= v[:-1] * (1 - 1e-12)))
        unbounded = bool(v[-1] > v[len(v) // 2] > v[0] or v[-1] > 10 * max(v[0], 1e-300))
        return {"positive": positive, "increasing": increasing, "unbounded": unbounded}


def numeric_inverse(g, y):
    """Generalized inverse sup{x : g(x) < y} by vectorized bisection."""
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    out = np.zeros(flat.shape)
    g0 = float(g(0.0))
    todo = flat > g0
    if todo.any():
        t = flat[todo]
        lo = np.zeros(t.shape)
        hi = np.ones(t.shape)
        for _ in range(1100):
            need = np.asarray(g(hi)) < t
            if not need.any():
                break
            lo = np.where(need, hi, lo)
            hi = np.where(need, hi * 2.0, hi)
            if np.isinf(hi).all():
                break
        for _ in range(300):
            mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * (lo + hi))
            mid = np.where(np.isfinite(mid), mid, 0.5 * lo + 0.5 * hi)
            below = np.asarray(g(mid)) < t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-15 * hi):
                break
        out[todo] = hi
    out = out.reshape(y.shape)
    return out if out.ndim else float(out)


def g_inverse(g: GFunction, x):
    """g^{-1}(x) = sup{y : g(y) < x}, 0 when the set is empty."""
    if np.any(np.asarray(x) < 0):
        raise ValueError("g_inverse is defined for x >= 0")
    return g.inverse(x)


# --------------------------------------------------------------------------
# registered families


@dataclass(frozen=True)
class IteratedLogG(GFunction):
    """g(x) = L_{(n, alpha, eps)}(e^x)
    = (log_{(n)} x)^{eps + 1/alpha} prod_{k<n} (log_{(k)} x)^{1/alpha}."""

    n: int = 1
    alpha: float = 1.0
    eps: float = 0.0
    family = "iterated_log"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1 or not self.alpha > 0:
            raise SpecError("iterated-log g needs integer n >= 1 and alpha > 0")
        if self.eps + 2 / self.alpha <= 0:
            raise SpecError("eps too negative: g would not be increasing")

    @property
    def x0(self):
        return _tower(int(self.n))

    def _log_g(self, x):
        a = 1.0 / self.alpha
        out = np.zeros(np.shape(x))
        cur = np.asarray(x, float)
        for _ in range(int(self.n)):
            out = out + a * np.log(cur)
            cur = np.log(cur)
        return out + (self.eps + a) * np.log(cur)

    def asymptotics(self):
        a = 1.0 / self.alpha
        return GAsymptotics(a, tuple([a] * int(self.n) + [self.eps + a]))

    def inverse_class(self):
        n = int(self.n)
        logs = [-1.0] * (n - 1) + [-(self.alpha * self.eps + 1)]
        return InverseClass("poly", p=self.alpha, q=logs[0], more=tuple(logs[1:]))


@dataclass(frozen=True)
class PowerLogG(GFunction):
    """g(x) = c X^p (log X)^q with X = max(x, x0)."""

    c: float = 1.0
    p: float = 1.0
    q: float = 0.0
    x0: float = E
    family = "power_log"

    def __post_init__(self):
        if not (self.c > 0 and self.p > 0):
            raise SpecError("power-log g needs c > 0 and p > 0")
        if self.q != 0 and self.x0 < E:
            raise SpecError("a log factor needs x0 >= e")

    def __call__(self, x):
        x = np.maximum(np.asarray(x, float), self.x0)
        with np.errstate(divide="ignore"):
            out = self.c * x**self.p * (np.log(x) ** self.q if self.q else 1.0)
        return out if np.ndim(out) else float(out)

    def inverse(self, y):
        if self.q != 0:
            return numeric_inverse(self, y)
        y = np.asarray(y, float)
        out = np.where(y > self(0.0), (np.maximum(y, 0) / self.c) ** (1 / self.p), 0.0)
        return out if out.ndim else float(out)

    def asymptotics(self):
        return GAsymptotics(self.p, (self.p, self.q))

    def inverse_class(self):
        return InverseClass("poly", p=1 / self.p, q=-self.q / self.p)


@dataclass(frozen=True)
class ExpSqrtLogG(GFunction):
    """g(x) = exp(sqrt(2 a log X)), X = max(x, e); g^{-1}(y) = exp((log y)^2 / (2a))."""

    a: float = 1.0
    family = "exp_sqrt_log"
    x0 = E

    def __post_init__(self):
        if not self.a > 0:
            raise SpecError("exp-sqrt-log g needs a > 0")

    def _log_g(self, x):
        return np.sqrt(2 * self.a * np.log(x))

    def log_inverse(self, y):
        y = np.asarray(y, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(y > math.exp(math.sqrt(2 * self.a)), np.log(np.maximum(y, 1e-300)) ** 2 / (2 * self.a), -np.inf)
        return out if out.ndim else float(out)

    def inverse(self, y):
        with np.errstate(over="ignore"):
            out = np.exp(self.log_inverse(y))
        return out if np.ndim(out) else float(out)

    def asymptotics(self):
        return GAsymptotics(0.0, None)

    def inverse_class(self):
        return InverseClass("logquad", c=1 / (2 * self.a))


@dataclass(frozen=True)
class WeibullTypeG(GFunction):
    """g(x) = (log X)^{1/alpha} / (log log X)^{beta/alpha}."""

    alpha: float = 1.0
    beta: float = 0.0
    family = "weibull_type"

    def __post_init__(self):
        if not self.alpha > 0:
            raise SpecError("weibull-type g needs alpha > 0")

    @property
    def x0(self):
        return math.exp(math.exp(max(1.0, self.beta)))

    def _log_g(self, x):
        l1 = np.log(x)
        return np.log(l1) / self.alpha - (self.beta / self.alpha) * np.log(np.log(l1))

    def asymptotics(self):
        return GAsymptotics(0.0, (0.0, 1 / self.alpha, -self.beta / self.alpha))

    def inverse_class(self):
        return InverseClass("exp", c=self.alpha**self.beta, a=self.alpha, b=self.beta)


@dataclass(frozen=True)
class YoungTypeG(GFunction):
    """g(x) = log X / ((log_2 X)^{alpha-1} (log_3 X)^beta)^{1/alpha}."""

    alpha: float = 1.0
    beta: float = 0.0
    family = "young_type"

    def __post_init__(self):
        if not self.alpha >= 1:
            raise SpecError("young-type g needs alpha >= 1")

    @property
    def x0(self):
        a, b = self.alpha, self.beta
        u0 = E * max(1.0, (abs(a - 1) + abs(b)) / a + 1)
        return math.exp(math.exp(u0))

    def _log_g(self, x):
        l1 = np.log(x)
        l2 = np.log(l1)
        l3 = np.log(l2)
        return l2 - ((self.alpha - 1) * np.log(l2) + self.beta * np.log(l3)) / self.alpha

    def asymptotics(self):
        a = self.alpha
        return GAsymptotics(0.0, (0.0, 1.0, -(a - 1) / a, -self.beta / a))

    def inverse_class(self):
        a = self.alpha
        return InverseClass("exp", c=1.0, a=1.0, b=(a - 1) / a, e=self.beta / a)


@dataclass(frozen=True)
class LogLogRatioG(GFunction):
    """g(x) = log X / log log X with X = max(x, e^e)."""

    family = "loglog_ratio"
    x0 = math.exp(E)

    def _log_g(self, x):
        l1 = np.log(x)
        return np.log(l1) - np.log(np.log(l1))

    def asymptotics(self):
        return GAsymptotics(0.0, (0.0, 1.0, -1.0))

    def inverse_class(self):
        return InverseClass("exp", c=1.0, a=1.0, b=1.0)

    def params(self):
        return {}


@dataclass(frozen=True)
class ExponentialG(GFunction):
    """g(x) = exp(c x)."""

    c: float = 1.0
    family = "exponential"

    def __post_init__(self):
        if not self.c > 0:
            raise SpecError("exponential g needs c > 0")

    def _log_g(self, x):
        return self.c * np.asarray(x, float)

    def inverse(self, y):
        y = np.asarray(y, float)
        with np.errstate(divide="ignore"):
            out = np.where(y > 1.0, np.log(np.maximum(y, 1.0)) / self.c, 0.0)
        return out if out.ndim else float(out)

    def asymptotics(self):
        return GAsymptotics(math.inf, None)

    def inverse_class(self):
        return InverseClass("poly", p=0.0, q=1.0)


@dataclass(frozen=True)
class ExpPowerInverseG(GFunction):
    """Defined through its inverse: g^{-1}(y) = exp(c y^a l(y)^b l2(y)^e) for y > 1,
    l(y) = log(e + y), l2(y) = log(e + l(y)); g = 1 below g^{-1}(1+)."""

    c: float = 1.0
    a: float = 1.0
    b: float = 0.0
    e: float = 0.0
    family = "exp_power_inverse"

    def __post_init__(self):
        if not (self.c > 0 and self.a > 0):
            raise SpecError("exp-power inverse needs c > 0 and a > 0")
        yy = np.geomspace(1.0, 1e6, 200)
        if np.any(np.diff(self._log_inv(yy)) < 0):
            raise SpecError("exp-power inverse must be increasing on y > 1")

    def _log_inv(self, y):
        l1 = np.log(E + y)
        out = self.c * y**self.a
        if self.b:
            out = out * l1**self.b
        if self.e:
            out = out * np.log(E + l1) ** self.e
        return out

    def log_inverse(self, y):
        y = np.asarray(y, float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(y > 1.0, self._log_inv(np.maximum(y, 1.0)), -np.inf)
        return out if out.ndim else float(out)

    def inverse(self, y):
        with np.errstate(over="ignore"):
            out = np.exp(self.log_inverse(y))
        return out if np.ndim(out) else float(out)

    def __call__(self, x):
        # g(x) = inf{y > 1 : log g^{-1}(y) >= log x}, solved in log y
        x = np.asarray(x, float)
        flat = np.atleast_1d(x).ravel()
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(flat, 0.0))
        base = float(self._log_inv(1.0))
        out = np.ones(flat.shape)
        todo = lx > base
        if todo.any():
            t = lx[todo]
            lo = np.zeros(t.shape)
            hi = np.ones(t.shape)
            while True:
                need = self._log_inv(np.exp(hi)) < t
                if not need.any():
                    break
                lo = np.where(need, hi, lo)
                hi = np.where(need, 2 * hi, hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                below = self._log_inv(np.exp(mid)) < t
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
                if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
                    break
            out[todo] = np.exp(hi)
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    def asymptotics(self):
        a = self.a
        return GAsymptotics(0.0, (0.0, 1 / a, -self.b / a, -self.e / a))

    def inverse_class(self):
        return InverseClass("exp", c=self.c, a=self.a, b=self.b, e=self.e)


@dataclass(frozen=True, eq=False)
class StepG(GFunction):
    """g = y[i] on [x[i], x[i+1]), x[0] = 0, extended by y[-1] beyond x[-1]."""

    x: np.ndarray
    y: np.ndarray
    report: dict = field(default_factory=dict, compare=False)
    family = "step"

    def __post_init__(self):
        xs = np.asarray(self.x, float).ravel()
        ys = np.asarray(self.y, float).ravel()
        if xs.shape != ys.shape or xs.size == 0:
            raise SpecError("step g needs matching breakpoint and value arrays")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise SpecError("step g breakpoints must start at 0 and increase strictly")
        if np.any(ys <= 0) or np.any(np.diff(ys) < 0):
            raise SpecError("step g values must be positive and nondecreasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", ys)

    def __call__(self, x):
        x = np.asarray(x, float)
        idx = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 1)
        out = self.y[idx]
        return out if out.ndim else float(out)

    def inverse(self, v):
        v = np.asarray(v, float)
        m = np.searchsorted(self.y, v, side="left")  # number of steps with y < v
        xs = np.append(self.x, math.inf)
        out = np.where(m == 0, 0.0, xs[np.minimum(m, self.x.size)])
        return out if out.ndim else float(out)

    def params(self):
        return {}

    def to_dict(self):
        return {"family": "step", "x": io.encode_array(self.x), "y": io.encode_array(self.y)}

    @classmethod
    def _from_params(cls, doc):
        return cls(io.decode_array(doc["x"]), io.decode_array(doc["y"]))


@dataclass(frozen=True, eq=False)
class TabulatedG(GFunction):
    """Piecewise-linear g through (x, y) nodes, linear extension past the last node."""

    x: np.ndarray
    y: np.ndarray
    family = "tabulated"

    def __post_init__(self):
        xs = np.asarray(self.x, float).ravel()
        ys = np.asarray(self.y, float).ravel()
        if xs.shape != ys.shape or xs.size < 2 or xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise SpecError("tabulated g needs >= 2 nodes starting at x = 0")
        if np.any(ys <= 0) or np.any(np.diff(ys) < 0) or ys[-1] <= ys[-2]:
            raise SpecError("tabulated g must be positive, nondecreasing and rising at the end")
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", ys)

    def __call__(self, x):
        x = np.asarray(x, float)
        slope = (self.y[-1] - self.y[-2]) / (self.x[-1] - self.x[-2])
        out = np.where(x > self.x[-1], self.y[-1] + slope * (x - self.x[-1]), np.interp(x, self.x, self.y))
        return out if out.ndim else float(out)

    def params(self):
        return {}

    def to_dict(self):
        return {"family": "tabulated", "x": io.encode_array(self.x), "y": io.encode_array(self.y)}

    @classmethod
    def _from_params(cls, doc):
        return cls(io.decode_array(doc["x"]), io.decode_array(doc["y"]))


@dataclass(frozen=True, eq=False)
class Rescaled(GFunction):
    """x -> base(a x): the clock-rescaled normalizer."""

    inner: GFunction
    a: float
    family = "rescaled"

    def __post_init__(self):
        if not self.a > 0:
            raise SpecError("rescaling factor must be positive")

    def __call__(self, x):
        return self.inner(np.asarray(x, float) * self.a)

    def inverse(self, y):
        return self.inner.inverse(y) / self.a

    def log_inverse(self, y):
        return self.inner.log_inverse(y) - math.log(self.a)

    @property
    def x0(self):
        return self.inner.x0 / self.a

    @property
    def base(self):
        return self.inner.base

    def asymptotics(self):
        return self.inner.asymptotics()

    def inverse_class(self):
        return self.inner.inverse_class()

    def rescaled(self, a):
        return Rescaled(self.inner, self.a * a)

    def to_dict(self):
        return {"family": "rescaled", "a": self.a, "inner": self.inner.to_dict()}

    @classmethod
    def _from_params(cls, doc):
        return cls(GFunction.from_dict(doc["inner"]), float(doc["a"]))


G_FAMILIES = {
    c.family: c
    for c in (
        IteratedLogG,
        PowerLogG,
        ExpSqrtLogG,
        WeibullTypeG,
        YoungTypeG,
        LogLogRatioG,
        ExponentialG,
        ExpPowerInverseG,
        StepG,
        TabulatedG,
        Rescaled,
    )
}


def make_g(family: str, **params) -> GFunction:
    try:
        cls = G_FAMILIES[family]
    except KeyError:
        raise SpecError(f"unknown g family {family!r}; known: {sorted(G_FAMILIES)}") from None
    return cls._from_params(params) if family in ("step", "tabulated", "rescaled") else cls(**params)


# --------------------------------------------------------------------------
# submultiplicativity


@dataclass(frozen=True)
class ExpPowerLogH:
    """h(x) = exp(c x^alpha (log(x + 1))^beta) on R+."""

    c: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0

    def log(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lb = np.log1p(x) ** self.beta if self.beta else 1.0
            out = self.c * np.where(x > 0, x**self.alpha * lb, 0.0)
        return out

    def __call__(self, x):
        with np.errstate(over="ignore"):
            return np.exp(self.log(x))


@dataclass(frozen=True)
class SubmultVerdict:
    verdict: str  # Yes | No | Inconclusive
    c: float | None = None
    witness: tuple | None = None
    route: str = "numeric"
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "c": self.c,
            "witness": None if self.witness is None else list(self.witness),
            "route": self.route,
            "evidence": self.evidence,
        }


RAYS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


def is_submultiplicative(h, *, log_h=None, route="auto", budget=100_000, x_max=1e6, seed=0) -> SubmultVerdict:
    """Decide whether h(x + y) <= c h(x) h(y) on R+.

    Analytic route for :class:`ExpPowerLogH`: Yes iff 0 < alpha < 1, or alpha = 1
    and beta <= 0 (or c = 0).  Numeric route: rays y = t x plus log-uniform random
    pairs, ``budget`` evaluations of h in total.
    """
    if route in ("auto", "analytic") and isinstance(h, ExpPowerLogH):
        a, b = h.alpha, h.beta
        yes = h.c == 0 or (0 < a < 1) or (a == 1 and b <= 0)
        return SubmultVerdict("Yes" if yes else "No", route="analytic",
                              evidence={"alpha": a, "beta": b, "c": h.c})
    if route == "analytic":
        return SubmultVerdict("Inconclusive", route="analytic", evidence={"reason": "no registered family"})

    if log_h is None:
        if isinstance(h, ExpPowerLogH):
            log_h = h.log
        else:
            def log_h(x):
                with np.errstate(divide="ignore", over="ignore"):
                    return np.log(np.asarray(h(x), dtype=float))

    n_pairs = max(10, budget // 3)
    n_ray = max(20, n_pairs // (2 * len(RAYS)))
    n_rand = max(10, n_pairs - n_ray * len(RAYS))

    def L(x, y):
        with np.errstate(invalid="ignore", over="ignore"):
            v = log_h(x + y) - log_h(x) - log_h(y)
        return np.where(np.isnan(v), np.inf, v)

    best = -np.inf
    witness = None
    ray_growth = {}
    small = -np.inf
    x_small = x_max / 100
    for t in RAYS:
        xs = np.geomspace(1e-3, x_max / (1 + t), n_ray)
        v = L(xs, t * xs)
        tail = v[int(0.8 * n_ray):]
        ref = v[np.searchsorted(xs, xs[-1] / 100)]
        growth = float(v[-1] - ref)
        ray_growth[t] = growth
        if np.all(np.diff(tail) >= -1e-9 * np.abs(tail[1:])) and growth > math.log(10):
            return SubmultVerdict("No", witness=(float(xs[-1]), float(t * xs[-1])), route="numeric",
                                  evidence={"ray": t, "log_ratio_growth": growth, "evaluations": 3 * n_ray * len(RAYS)})
        i = int(np.argmax(v))
        if v[i] > best:
            best, witness = float(v[i]), (float(xs[i]), float(t * xs[i]))
        sel = (1 + t) * xs <= x_small
        if sel.any():
            small = max(small, float(v[sel].max()))
    gen = np.random.default_rng(seed)
    xs = np.exp(gen.uniform(math.log(1e-3), math.log(x_max / 2), n_rand))
    ys = np.exp(gen.uniform(math.log(1e-3), math.log(x_max / 2), n_rand))
    v = L(xs, ys)
    i = int(np.argmax(v))
    if v[i] > best:
        best, witness = float(v[i]), (float(xs[i]), float(ys[i]))
    sel = xs + ys <= x_small
    if sel.any():
        small = max(small, float(v[sel].max()))
    evidence = {"max_log_ratio": best, "max_log_ratio_small_scale": small,
                "ray_growth": {str(k): g for k, g in ray_growth.items()}, "evaluations": 3 * (n_ray * len(RAYS) + n_rand)}
    if np.isfinite(best) and best - small <= 1e-6 + 1e-3 * abs(best):
        return SubmultVerdict("Yes", c=float(math.exp(best)), route="numeric", evidence=evidence)
    return SubmultVerdict("Inconclusive", witness=witness, route="numeric", evidence=evidence)


# --------------------------------------------------------------------------
# Young conjugates


def _bisect_increasing(fun, target, lo=0.0, hi=1.0, rtol=1e-10):
    """Smallest-ish x with fun(x) >= target for increasing fun (scalar)."""
    while fun(hi) < target:
        lo, hi = hi, hi * 2.0
        if not math.isfinite(hi):
            return math.inf
    for _ in range(400):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if fun(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class YoungPair:
    """Young conjugate pair h = int q, f = int q^{-1} for an increasing q.

    f is evaluated through the equality case of Young's inequality,
    f(y) = y s - h(s) with s = q^{-1}(y), which holds for every right-continuous
    increasing q.
    """

    q: object
    q_inv: object = None
    knots: np.ndarray = field(default=None, repr=False)
    cum: np.ndarray = field(default=None, repr=False)

    def q_inverse(self, s):
        if self.q_inv is not None:
            return self.q_inv(s)
        return numeric_inverse(_QAsG(self.q), s)

    def h(self, x):
        x = float(x)
        if x <= 0:
            return 0.0
        i = int(np.searchsorted(self.knots, x, side="right") - 1)
        return float(self.cum[i] + quad(lambda t: float(self.q(t)), self.knots[i], x))

    def f(self, y):
        y = float(y)
        if y <= 0:
            return 0.0
        s = float(self.q_inverse(y))
        return y * s - self.h(s)

    def f_by_quadrature(self, y):
        """Direct quadrature of q^{-1} over [0, y] (audit path)."""
        pts = np.concatenate([[0.0], np.geomspace(1e-9 * y, y, 40)])
        return float(sum(quad(lambda s: float(self.q_inverse(s)), a, b, strict=False) for a, b in zip(pts[:-1], pts[1:])))

    def h_inv(self, v):
        return _bisect_increasing(self.h, float(v))

    def f_inv(self, v):
        return _bisect_increasing(self.f, float(v))


class _QAsG:
    """Adapter so numeric_inverse can invert q (q(0) = 0 is allowed)."""

    x0 = 0.0

    def __init__(self, q):
        self.q = q

    def __call__(self, x):
        return np.asarray(self.q(np.asarray(x, float)), float)


def young_pair(q, q_inv=None, x_max=1e12) -> YoungPair:
    """Validate q and precompute cumulative integrals of q on a log grid."""
    probe = np.geomspace(1e-6, 1e6, 241)
    try:
        q0 = float(q(0.0))
        vals = np.asarray(q(probe), dtype=float)
    except Exception as exc:  # noqa: BLE001 - user callables
        raise QValidationFailed(f"q could not be evaluated: {exc}") from exc
    if abs(q0) > 1e-12:
        raise QValidationFailed("q(0) must be 0")
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise QValidationFailed("q must be positive and finite on (0, inf)")
    if np.any(np.diff(vals) < -1e-12 * vals[1:]):
        raise QValidationFailed("q must be increasing")
    if not vals[-1] > 10 * vals[len(vals) // 2]:
        raise QValidationFailed("q must be unbounded")
    knots = np.concatenate([[0.0], np.geomspace(1e-8, x_max, 201)])
    cells = [quad(lambda t: float(q(t)), a, b) for a, b in zip(knots[:-1], knots[1:])]
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    return YoungPair(q, q_inv, knots, cum)


def conjugate_eval(pair: YoungPair, x: float):
    """(h(x), f(x), h^{-1}(x), f^{-1}(x))."""
    return pair.h(x), pair.f(x), pair.h_inv(x), pair.f_inv(x)


def q_for_power_log_h(alpha: float, beta: float, t0: float = E):
    """q = h' for h(x) = x^alpha (log x)^beta beyond t0, linear on [0, t0]."""

    def hp(t):
        t = np.asarray(t, float)
        lt = np.log(t)
        return t ** (alpha - 1) * lt ** (beta - 1) * (alpha * lt + beta)

    qt0 = float(hp(t0))

    def q(t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t >= t0, hp(np.maximum(t, t0)), qt0 * np.maximum(t, 0.0) / t0)
        return out if out.ndim else float(out)

    return q


# --------------------------------------------------------------------------
# log-domain quadrature for the constructions


def log_integral(lam, a: float, b: float) -> float:
    """log of int_a^b exp(lam(u)) du for lam increasing on [a, b].

    Moderate integrands use adaptive quadrature of exp(lam - lam(b)).  When
    the integrand concentrates in a layer at b thinner than the floating point
    resolution of u, the Laplace endpoint formula lam(b) - log lam'(b) is used;
    its relative error is of order lam''/lam'^2.
    """
    lb = float(lam(b))
    if not np.isfinite(lb):
        return lb
    h = 1e-6 * max(1.0, abs(b))
    slope = (lb - float(lam(b - h))) / h
    width = b - a
    if slope * width < 50 or slope < 1e3:
        val = quad(lambda u: math.exp(min(float(lam(u)) - lb, 0.0)), a, b, strict=False)
        return lb + math.log(val) if val > 0 else -math.inf
    layer = 60.0 / slope
    if layer > 1e4 * np.spacing(abs(b)):
        lo = max(a, b - layer)
        val = quad(lambda u: math.exp(min(float(lam(u)) - lb, 0.0)), lo, b, strict=False)
        return lb + math.log(val)
    return lb - math.log(slope) + math.log1p(-math.exp(-min(slope * width, 700.0)))


# --------------------------------------------------------------------------
# construction of g from a non-OR tail


def build_g_from_tail(G1: TailFn, *, max_terms=5000, divergence_threshold=1e3, tail_tol=1e-9,
                      check_class=True) -> StepG:
    """Step normalizer g = y_n on [x_n, x_{n+1}) for a tail G1 outside OR.

    y_n is the smallest y >= y_{n-1} with 2^{-n} G1(y) >= G1(2y) (doubling then
    bisection) and x_{n+1} = x_n + 1.5 / G1(y_n), so G1(y_n)(x_{n+1} - x_n) = 1.5.
    The returned StepG carries a verification report.
    """
    if check_class:
        from .tail_analysis import classify_OR

        verdict = classify_OR(G1)
        if verdict.verdict != "NotInClass":
            raise NotConstructible(f"tail is not rejected from OR (verdict {verdict.verdict}); no g exists")

    logG = lambda y: float(G1.log_value(np.array([y]))[0])  # noqa: E731

    def ok(y, n):
        return logG(y) - n * math.log(2.0) >= logG(2 * y)

    xs = [0.0]
    ys = []
    y = float(G1.r[0])
    s_div = 0.0
    s_conv = 0.0
    last_conv_inc = math.inf
    stop = "budget"
    for n in range(max_terms):
        if not ok(y, n):
            lo, hi = y, y
            for _ in range(2000):
                hi *= 2.0
                if not math.isfinite(hi) or hi > 1e300:
                    raise BudgetExceeded(f"y_n search stalled at n = {n}")
                if ok(hi, n):
                    break
                lo = hi
            else:
                raise BudgetExceeded(f"y_n search stalled at n = {n}")
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if ok(mid, n):
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-13 * hi:
                    break
            y = hi
        lg = logG(y)
        dx = 1.5 * math.exp(-lg) if -lg < 700 else math.inf
        x_next = xs[-1] + dx
        if not math.isfinite(x_next) or x_next > 1e300:
            stop = "float_range"
            break
        ys.append(y)
        xs.append(x_next)
        s_div += math.exp(lg) * dx
        last_conv_inc = math.exp(logG(2 * y)) * dx
        s_conv += last_conv_inc
        if s_div > divergence_threshold and last_conv_inc < tail_tol:
            stop = "verified"
            break
    if not ys:
        raise BudgetExceeded("no step could be constructed")
    report = {
        "terms": len(ys),
        "stop_reason": stop,
        "divergence_partial_sum": s_div,
        "divergence_proxy": s_div > divergence_threshold,
        "convergence_partial_sum_2g": s_conv,
        "convergence_last_increment_2g": last_conv_inc,
        "convergence_proxy": last_conv_inc < tail_tol,
        "thresholds": {"divergence": divergence_threshold, "tail_increment": tail_tol},
    }
    return StepG(np.array(xs[:-1]), np.array(ys), report)


# --------------------------------------------------------------------------
# construction of K from g


@dataclass(frozen=True, eq=False)
class KConstruction:
    profile: LevyProfile
    x: np.ndarray
    log_C: np.ndarray
    report: dict

    def to_dict(self):
        return {
            "profile": self.profile.to_dict(),
            "x": io.encode_array(self.x),
            "log_C": io.encode_array(self.log_C),
            "report": self.report,
        }


def check_K_hypotheses(g: GFunction) -> list:
    """(hypothesis, verdict) pairs for the K-from-g construction."""
    from .tail_analysis import classify_OR

    trail = []
    ic = g.inverse_class()
    if ic is not None:
        trail.append(("g^-1 + log not in OR", "pass" if not ic.in_OR else "fail"))
        sub = ic.submultiplicative
        trail.append(("g^-1 submultiplicative", {True: "pass", False: "fail", None: "unknown"}[sub]))
        return trail
    r = np.geomspace(1.0, 1e12, 400)
    phi = np.asarray(g.inverse(r), float) + np.log(r)
    phi = np.maximum(phi, 1e-300)
    v = classify_OR(TailFn("custom", r, phi, None, "g^-1 + log"))
    trail.append(("g^-1 + log not in OR", {"NotInClass": "pass", "InClass": "fail"}.get(v.verdict, "unknown")))
    sv = is_submultiplicative(lambda x: np.maximum(np.asarray(g.inverse(x), float), 1.0),
                              log_h=lambda x: np.maximum(np.asarray(g.log_inverse(x), float), 0.0))
    trail.append(("g^-1 submultiplicative", {"Yes": "pass", "No": "fail"}.get(sv.verdict, "unknown")))
    return trail


def build_K_from_g(g: GFunction, H: float, *, max_terms=5000, divergence_threshold=1e3,
                   tail_tol=1e-9, x_limit=1e300) -> KConstruction:
    """Step Lévy kernel K whose Sato processes satisfy the limsup law with C = 1
    up to the normalization factor of the Gaussian-free limsup law.

    x_0 = 1 and x_{n+1} is the smallest point beyond e^{2H} x_n (strictly) with
    2^{-(n+1)} phi(x_{n+1}) >= phi(e^{-H} x_{n+1}), phi = g^{-1} + log.  All
    quantities are carried as logarithms; the run stops once the divergence
    proxy is met and the shifted-integral increments fall below ``tail_tol``,
    or when x_n would leave the float range.
    """
    if not H > 0:
        raise ValueError("H must be positive")
    trail = check_K_hypotheses(g)
    failed = [name for name, v in trail if v != "pass"]
    if failed:
        raise HypothesisViolated("; ".join(f"{name}: {dict(trail)[name]}" for name in failed))

    def lam(u):
        """log phi(e^u)."""
        li = float(g.log_inverse(math.exp(u)))
        if u > 0:
            return float(np.logaddexp(li, math.log(u)))
        return li

    def phi_lin(u):
        return float(g.inverse(math.exp(u))) + u

    two = math.log(2.0)

    def dominated(u, n):
        if u - H <= 0:
            # phi(e^{-H} x) may be negative there; compare on the linear scale
            return 2.0 ** (-n) * phi_lin(u) >= phi_lin(u - H)
        return lam(u) - n * two >= lam(u - H)

    us = [0.0]
    if not dominated(0.0, 0):
        raise HypothesisViolated("x_0 = 1 violates phi(1) >= phi(e^{-H})")
    u_cap = math.log(x_limit) - H
    stop = "budget"
    while len(us) < max_terms:
        n = len(us)
        u = us[-1] + 2 * H + 1e-9 * max(1.0, us[-1])
        if not dominated(u, n):
            lo, hi = u, u + H
            while not dominated(hi, n):
                lo, hi = hi, hi + 2 * (hi - u)
                if hi > u_cap:
                    break
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if dominated(mid, n):
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-12 * max(1.0, hi):
                    break
            u = hi
        if u > u_cap:
            stop = "float_range"
            break
        us.append(u)
        if n >= divergence_threshold + 2:
            stop = "verified"
            break
    us = np.array(us)
    log_C = np.array([log_integral(lam, ui, ui + H) for ui in us])
    # K on the cells: log of sum_{j >= n} C_j^{-1}
    neg = -log_C
    log_K = np.logaddexp.accumulate(neg[::-1])[::-1]
    breaks = np.exp(us + H)
    kernel = StepKernel(breaks, np.concatenate([log_K, [-np.inf]]))
    profile = LevyProfile(DirectionMeasure.positive_1d(), kernel, check_grid=np.geomspace(1e-6, float(breaks[-1]) * 2, 400))

    # downstream verification, integrating against the kernel itself
    def log_dK(u):
        return float(log_sub(kernel.log_value(math.exp(u)), kernel.log_value(math.exp(u + H))))

    contrib_div = []
    contrib_shift = []
    for i, ui in enumerate(us):
        mid = ui + 0.5 * H
        dk = log_dK(mid)
        # the two logarithms are formed separately: their sum cancels to O(1)
        contrib_div.append(math.exp(log_integral(lam, ui, ui + H) + dk))
        if ui - 2 * H + H <= 0:
            val = quad(lambda s: phi_lin(s - 2 * H), ui, ui + H, strict=False) * math.exp(dk)
        else:
            val = math.exp(log_integral(lambda s: lam(s - 2 * H), ui, ui + H) + dk)
        contrib_shift.append(val)
        if i + 1 < len(us):
            gap = 0.5 * (ui + H + us[i + 1])
            if np.isfinite(log_dK(gap)):
                raise AssertionError("K(r) - K(e^H r) must vanish between cells")
    contrib_div = np.array(contrib_div)
    contrib_shift = np.array(contrib_shift)
    s_div = float(contrib_div.sum())
    report = {
        "H": H,
        "terms": int(us.size),
        "stop_reason": stop,
        "hypotheses": [list(t) for t in trail],
        "sum_inverse_C": float(math.exp(log_K[0])),
        "last_inverse_C": float(math.exp(-log_C[-1])),
        "sum_inverse_C_converges": bool(math.exp(-log_C[-1]) < tail_tol),
        "divergence_partial_sum": s_div,
        "divergence_proxy": s_div > divergence_threshold,
        "shifted_partial_sum": float(contrib_shift.sum()),
        "shifted_last_increment": float(abs(contrib_shift[-1])),
        "convergence_proxy": bool(abs(contrib_shift[-1]) < tail_tol),
        "kernel_decreasing": bool(np.all(np.diff(kernel.log_values) <= 0)),
        "levy_integrable": bool(profile.is_integrable()),
        "thresholds": {"divergence": divergence_threshold, "tail_increment": tail_tol},
    }
    return KConstruction(profile, np.exp(us), log_C, report)
