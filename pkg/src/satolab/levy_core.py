"""Process specifications, Lévy profiles and the tail functions G_l, K, L, M.

A Sato process is described by its exponent H and the selfdecomposable law
mu of X(1).  The Lévy measure of mu has the polar form

    nu(B) = sum_j w_j int 1_B(r xi_j) k_j(r) dr / r,

with decreasing radial kernels k_j, and everything downstream is expressed
through K(r) = sum_j w_j k_j(r).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import io
from .errors import (
    DensityUnavailable,
    QuadratureFailure,
    SamplerUnavailable,
    SpecError,
)
from .rng import as_stream
from .special import bessel_zeros

QUAD_RTOL = 1e-8
QUAD_ATOL = 1e-300


def quad(f, a, b, points=None, limit=200, strict=True):
    """scipy.quad at the toolkit tolerances; raises QuadratureFailure when strict."""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error" if strict else "ignore", integrate.IntegrationWarning)
        try:
            kw = {"points": points} if points is not None and len(points) else {}
            val, err = integrate.quad(f, a, b, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=limit, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if not np.isfinite(val):
        raise QuadratureFailure(f"non-finite quadrature on [{a}, {b}]")
    return val


def _log_e_plus(r):
    return np.log(math.e + np.asarray(r, dtype=float))


# --------------------------------------------------------------------------
# asymptotic families for tail functions


class TailFamily:
    """Registered asymptotic form of a positive decreasing tail."""

    name = "family"

    def log_value(self, r):
        raise NotImplementedError

    def __call__(self, r):
        return np.exp(self.log_value(r))

    def dilated(self, lam: float) -> "TailFamily":
        """Asymptotic form of r -> f(r / lam)."""
        raise NotImplementedError

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_dict(self):
        return {"family": self.name, **{k: io.encode_scalar(v) for k, v in self.params().items()}}

    @staticmethod
    def from_dict(doc) -> "TailFamily":
        doc = dict(doc)
        cls = _TAIL_FAMILIES[doc.pop("family")]
        return cls(**{k: io.decode_scalar(v) for k, v in doc.items()})


@dataclass(frozen=True)
class PowerLog(TailFamily):
    """c r^{-p} (log r)^{-q}."""

    c: float = 1.0
    p: float = 1.0
    q: float = 0.0
    name = "power_log"

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        return math.log(self.c) - self.p * np.log(r) - self.q * np.log(_log_e_plus(r))

    def dilated(self, lam):
        return PowerLog(self.c * lam**self.p, self.p, self.q)


@dataclass(frozen=True)
class LogWeibull(TailFamily):
    """exp(-c r^alpha (log r)^beta)."""

    c: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    name = "log_weibull"

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        return -self.c * r**self.alpha * _log_e_plus(r) ** self.beta

    def dilated(self, lam):
        return LogWeibull(self.c * lam ** (-self.alpha), self.alpha, self.beta)


@dataclass(frozen=True)
class Stretched(TailFamily):
    """c (log r)^{-q} exp(-a (log r - shift)^2), the lognormal-type tail."""

    c: float = 1.0
    a: float = 0.5
    q: float = 0.0
    shift: float = 0.0
    name = "stretched"

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        return math.log(self.c) - self.q * np.log(_log_e_plus(r)) - self.a * (np.log1p(r) - self.shift) ** 2

    def dilated(self, lam):
        return Stretched(self.c, self.a, self.q, self.shift + math.log(lam))


@dataclass(frozen=True)
class Vanishing(TailFamily):
    """level on (0, cutoff), exactly 0 from cutoff on."""

    cutoff: float = 1.0
    level: float = 1.0
    name = "vanishing"

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r < self.cutoff, math.log(self.level), -np.inf)

    def dilated(self, lam):
        return Vanishing(self.cutoff * lam, self.level)


_TAIL_FAMILIES = {c.name: c for c in (PowerLog, LogWeibull, Stretched, Vanishing)}


# --------------------------------------------------------------------------
# TailFn


TAIL_KINDS = ("G_l", "K", "L", "M", "empirical", "custom")


@dataclass(frozen=True, eq=False)
class TailFn:
    """Positive monotone function sampled on a log grid.

    Evaluation interpolates log-values linearly in log r inside the grid.
    Outside the grid the declared family is used if present, otherwise the
    end slopes are extended as power laws.
    """

    kind: str
    r: np.ndarray
    values: np.ndarray
    family: TailFamily | None = None
    label: str = ""

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.kind not in TAIL_KINDS:
            raise SpecError(f"unknown TailFn kind {self.kind!r}")
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise SpecError("TailFn needs matching 1-D grids of size >= 2")
        if not np.all(np.diff(r) > 0) or r[0] <= 0:
            raise SpecError("TailFn grid must be positive and strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise SpecError("TailFn values must be finite and nonnegative")
        if self.kind in ("G_l", "K"):
            if np.any(np.diff(v) > 1e-12 * np.abs(v[:-1]) + 1e-300):
                raise SpecError(f"TailFn of kind {self.kind} must be decreasing")
        else:
            pos = v > 0
            if not pos.any():
                raise SpecError("TailFn values must not vanish identically")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, kind, f, r_min=1e-2, r_max=1e12, n=400, family=None, label=""):
        r = np.geomspace(r_min, r_max, n)
        return cls(kind, r, np.asarray(f(r), dtype=float), family, label)

    @classmethod
    def from_family(cls, family: TailFamily, kind="custom", r_min=1e-2, r_max=1e12, n=400, label=""):
        r = np.geomspace(r_min, r_max, n)
        return cls(kind, r, family(r), family, label or family.name)

    @property
    def decades(self) -> float:
        return math.log10(self.r[-1] / self.r[0])

    def vanishes(self) -> bool:
        return bool(self.values[-1] == 0.0) or isinstance(self.family, Vanishing)

    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        lr = np.log(self.r)
        with np.errstate(divide="ignore"):
            lv = np.log(self.values)
        lx = np.log(x)
        inside = (x >= self.r[0]) & (x <= self.r[-1])
        out = np.empty_like(lx)
        if np.all(np.isfinite(lv)):
            out[inside] = np.interp(lx[inside], lr, lv)
        else:
            # zero values: take the left node's value across a zero cell
            idx = np.clip(np.searchsorted(lr, lx[inside], side="right") - 1, 0, lr.size - 1)
            interp = np.interp(lx[inside], lr, np.where(np.isfinite(lv), lv, -745.0))
            out[inside] = np.where(np.isfinite(lv[np.minimum(idx + 1, lr.size - 1)]), interp, lv[idx])
        lo = x < self.r[0]
        hi = x > self.r[-1]
        if self.family is not None:
            if lo.any():
                out[lo] = self._anchored_family(lx[lo], 0)
            if hi.any():
                out[hi] = self._anchored_family(lx[hi], -1)
        else:
            s_lo = (lv[1] - lv[0]) / (lr[1] - lr[0]) if np.isfinite(lv[:2]).all() else 0.0
            s_hi = (lv[-1] - lv[-2]) / (lr[-1] - lr[-2]) if np.isfinite(lv[-2:]).all() else 0.0
            out[lo] = lv[0] + s_lo * (lx[lo] - lr[0])
            out[hi] = lv[-1] + s_hi * (lx[hi] - lr[-1]) if np.isfinite(lv[-1]) else -np.inf
        return out

    def _anchored_family(self, lx, end):
        f_end = float(self.family.log_value(self.r[end]))
        with np.errstate(divide="ignore"):
            v_end = math.log(self.values[end]) if self.values[end] > 0 else -np.inf
        shift = v_end - f_end if np.isfinite(f_end) and np.isfinite(v_end) else 0.0
        return self.family.log_value(np.exp(lx)) + shift

    def __call__(self, x):
        out = np.exp(self.log_value(x))
        return out if np.ndim(x) else float(out)

    def rescaled(self, c: float) -> "TailFn":
        """The function r -> f(c r) on the grid r / c."""
        fam = None if self.family is None else self.family.dilated(1.0 / c)
        return TailFn(self.kind, self.r / c, self.values, fam, self.label)

    def scaled(self, factor) -> "TailFn":
        """Multiply values by a constant or by an array on the grid."""
        return TailFn(self.kind, self.r, self.values * np.asarray(factor, float), self.family, self.label)

    def to_dict(self):
        return {
            "kind": self.kind,
            "label": self.label,
            "r": io.encode_array(self.r),
            "values": io.encode_array(self.values),
            "family": None if self.family is None else self.family.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        fam = doc.get("family")
        return cls(
            doc["kind"],
            io.decode_array(doc["r"]),
            io.decode_array(doc["values"]),
            None if fam is None else TailFamily.from_dict(fam),
            doc.get("label", ""),
        )


# --------------------------------------------------------------------------
# directions and kernels


@dataclass(frozen=True, eq=False)
class DirectionMeasure:
    """Finite atomic measure on the unit sphere S^{d-1}."""

    xi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if xi.shape[0] != w.size or w.size == 0:
            raise SpecError("direction atoms and weights must have matching nonzero length")
        if np.any(np.abs(np.linalg.norm(xi, axis=1) - 1.0) > 1e-12):
            raise SpecError("direction atoms must be unit vectors")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise SpecError("direction weights must be positive and finite")
        xi.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms):
        xi, w = zip(*atoms)
        return cls(np.array([np.atleast_1d(x) for x in xi], float), np.array(w, float))

    @classmethod
    def symmetric_1d(cls, total=1.0):
        return cls(np.array([[-1.0], [1.0]]), np.array([total / 2, total / 2]))

    @classmethod
    def positive_1d(cls, total=1.0):
        return cls(np.array([[1.0]]), np.array([total]))

    @property
    def d(self) -> int:
        return self.xi.shape[1]

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def normalized(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def first_moment(self) -> np.ndarray:
        return self.normalized @ self.xi

    def is_balanced(self, tol=1e-12) -> bool:
        return bool(np.all(np.abs(self.first_moment()) <= tol))

    def to_dict(self):
        return {"xi": [io.encode_array(x) for x in self.xi], "weights": io.encode_array(self.weights)}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array([io.decode_array(x) for x in doc["xi"]]), io.decode_array(doc["weights"]))


class Kernel:
    """Decreasing nonnegative radial kernel k(r)."""

    name = "kernel"
    lo_exponent = 0.0  # k ~ r^{-lo} as r -> 0
    hi_exponent = math.inf  # k ~ r^{-hi} as r -> inf (inf: faster than any power)

    def log_value(self, r):
        raise NotImplementedError

    def __call__(self, r):
        out = np.exp(self.log_value(r))
        return out if np.ndim(r) else float(out)

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def support_end(self) -> float:
        """inf{r : k(r) = 0}."""
        return math.inf

    def is_zero(self) -> bool:
        return False

    def dilated(self, lam: float) -> "Kernel":
        return self if lam == 1.0 else DilatedKernel(self, lam)

    def to_dict(self):
        return {"kernel": self.name, **self._params()}

    def _params(self):
        return {k: io.encode_scalar(getattr(self, k)) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(doc) -> "Kernel":
        doc = dict(doc)
        cls = _KERNELS[doc.pop("kernel")]
        return cls._from_params(doc)

    @classmethod
    def _from_params(cls, doc):
        return cls(**{k: io.decode_scalar(v) for k, v in doc.items()})


@dataclass(frozen=True)
class ZeroKernel(Kernel):
    name = "zero"

    def log_value(self, r):
        return np.full(np.shape(r), -np.inf)

    def support_end(self):
        return 0.0

    def is_zero(self):
        return True

    def dilated(self, lam):
        return self

    def _params(self):
        return {}


@dataclass(frozen=True)
class PowerKernel(Kernel):
    """c r^{-alpha}."""

    alpha: float
    c: float = 1.0
    name = "power"

    def __post_init__(self):
        if not (self.c > 0 and self.alpha >= 0):
            raise SpecError("power kernel needs c > 0 and alpha >= 0")

    @property
    def lo_exponent(self):
        return self.alpha

    @property
    def hi_exponent(self):
        return self.alpha

    def log_value(self, r):
        return math.log(self.c) - self.alpha * np.log(np.asarray(r, dtype=float))

    def dilated(self, lam):
        return PowerKernel(self.alpha, self.c * lam**self.alpha)


@dataclass(frozen=True)
class ExpTiltedKernel(Kernel):
    """c r^{-alpha} exp(-lam r) (tempered power law)."""

    alpha: float
    lam: float
    c: float = 1.0
    name = "exp_tilted"

    def __post_init__(self):
        if not (self.c > 0 and self.alpha >= 0 and self.lam > 0):
            raise SpecError("tilted kernel needs c > 0, alpha >= 0, lam > 0")

    @property
    def lo_exponent(self):
        return self.alpha

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        return math.log(self.c) - self.alpha * np.log(r) - self.lam * r

    def dilated(self, lam):
        return ExpTiltedKernel(self.alpha, self.lam / lam, self.c * lam**self.alpha)


@dataclass(frozen=True, eq=False)
class StepKernel(Kernel):
    """Right-open steps: exp(log_values[i]) on [breaks[i-1], breaks[i]).

    ``log_values`` has one more entry than ``breaks``; log values are used so
    that astronomically small steps remain representable.
    """

    breaks: np.ndarray
    log_values: np.ndarray
    name = "step"

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float).ravel()
        lv = np.asarray(self.log_values, dtype=float).ravel()
        if lv.size != b.size + 1:
            raise SpecError("step kernel needs len(log_values) == len(breaks) + 1")
        if b.size and (b[0] <= 0 or np.any(np.diff(b) <= 0)):
            raise SpecError("step breakpoints must be positive and strictly increasing")
        if np.any(np.diff(lv) > 0) or np.any(np.isnan(lv)) or np.isposinf(lv).any():
            raise SpecError("step kernel values must be finite and decreasing")
        b.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "log_values", lv)

    @classmethod
    def from_values(cls, breaks, values):
        with np.errstate(divide="ignore"):
            return cls(np.asarray(breaks, float), np.log(np.asarray(values, float)))

    def log_value(self, r):
        idx = np.searchsorted(self.breaks, np.asarray(r, dtype=float), side="right")
        return self.log_values[idx]

    def breakpoints(self):
        return self.breaks

    def support_end(self):
        zero = np.flatnonzero(np.isneginf(self.log_values))
        if zero.size == 0:
            return math.inf
        i = zero[0]
        return 0.0 if i == 0 else float(self.breaks[i - 1])

    def is_zero(self):
        return bool(np.isneginf(self.log_values[0]))

    @property
    def hi_exponent(self):
        return math.inf if np.isneginf(self.log_values[-1]) else 0.0

    def dilated(self, lam):
        return StepKernel(self.breaks * lam, self.log_values)

    def _params(self):
        return {"breaks": io.encode_array(self.breaks), "log_values": io.encode_array(self.log_values)}

    @classmethod
    def _from_params(cls, doc):
        return cls(io.decode_array(doc["breaks"]), io.decode_array(doc["log_values"]))


@dataclass(frozen=True, eq=False)
class TabulatedKernel(Kernel):
    """Log-log interpolated table with power-law extrapolation at both ends."""

    r: np.ndarray
    values: np.ndarray
    lo_exp: float = 0.0
    hi_exp: float | None = None
    name = "tabulated"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise SpecError("tabulated kernel needs matching grids of size >= 2")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise SpecError("tabulated kernel grid must be positive and increasing")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise SpecError("tabulated kernel values must be positive and finite")
        if np.any(np.diff(v) > 1e-12 * v[:-1]):
            raise SpecError("tabulated kernel must be decreasing")
        hi = self.hi_exp
        if hi is None:
            hi = -(math.log(v[-1]) - math.log(v[-2])) / (math.log(r[-1]) - math.log(r[-2]))
        if self.lo_exp < 0 or hi < 0:
            raise SpecError("extrapolation exponents must keep the kernel decreasing")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "hi_exp", float(hi))

    @property
    def lo_exponent(self):
        return self.lo_exp

    @property
    def hi_exponent(self):
        return self.hi_exp

    def log_value(self, x):
        lx = np.log(np.asarray(x, dtype=float))
        lr = np.log(self.r)
        lv = np.log(self.values)
        out = np.interp(lx, lr, lv)
        out = np.where(lx < lr[0], lv[0] - self.lo_exp * (lx - lr[0]), out)
        return np.where(lx > lr[-1], lv[-1] - self.hi_exp * (lx - lr[-1]), out)

    def dilated(self, lam):
        return TabulatedKernel(self.r * lam, self.values * 1.0, self.lo_exp, self.hi_exp)

    def _params(self):
        return {
            "r": io.encode_array(self.r),
            "values": io.encode_array(self.values),
            "lo_exp": self.lo_exp,
            "hi_exp": self.hi_exp,
        }

    @classmethod
    def _from_params(cls, doc):
        return cls(io.decode_array(doc["r"]), io.decode_array(doc["values"]), doc["lo_exp"], doc["hi_exp"])


@dataclass(frozen=True)
class BesselHitKernel(Kernel):
    """sum_n exp(-j_{nu,n}^2 r / 2): Lévy kernel of the Bessel hitting time T_1."""

    nu: float
    n_exact: int = 400
    name = "bessel_hit"

    @property
    def lo_exponent(self):
        return 0.5

    def _zeros(self):
        return bessel_zeros(float(self.nu), int(self.n_exact))

    def log_value(self, r):
        r_in = np.asarray(r, dtype=float)
        r = np.atleast_1d(r_in).ravel()
        j2 = self._zeros() ** 2
        expo = -0.5 * np.outer(r, j2)
        lead = expo[:, 0]
        log_sum = lead + np.log(np.exp(expo - lead[:, None]).sum(axis=1))
        # remainder over McMahon zeros, summed as an integral over the index
        beta0 = (self.n_exact + 0.5 + self.nu / 2 - 0.25) * np.pi
        log_tail = (
            math.log(2.0)
            + special.log_ndtr(-beta0 * np.sqrt(r))
            - np.log(np.pi * np.sqrt(2 * r / np.pi))
        )
        out = np.logaddexp(log_sum, log_tail)
        return out.reshape(r_in.shape)


@dataclass(frozen=True, eq=False)
class DilatedKernel(Kernel):
    """r -> base(r / lam)."""

    base: Kernel
    lam: float
    name = "dilated"

    @property
    def lo_exponent(self):
        return self.base.lo_exponent

    @property
    def hi_exponent(self):
        return self.base.hi_exponent

    def log_value(self, r):
        return self.base.log_value(np.asarray(r, dtype=float) / self.lam)

    def breakpoints(self):
        return self.base.breakpoints() * self.lam

    def support_end(self):
        return self.base.support_end() * self.lam

    def is_zero(self):
        return self.base.is_zero()

    def dilated(self, lam):
        return DilatedKernel(self.base, self.lam * lam)

    def _params(self):
        return {"base": self.base.to_dict(), "lam": self.lam}

    @classmethod
    def _from_params(cls, doc):
        return cls(Kernel.from_dict(doc["base"]), doc["lam"])


_KERNELS = {
    c.name: c
    for c in (ZeroKernel, PowerKernel, ExpTiltedKernel, StepKernel, TabulatedKernel, BesselHitKernel, DilatedKernel)
}


@dataclass(frozen=True, eq=False)
class LevyProfile:
    """Spherical measure sigma plus one radial kernel per atom."""

    directions: DirectionMeasure
    kernels: tuple
    approximate: bool = False
    check_grid: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        ks = self.kernels
        if isinstance(ks, Kernel):
            ks = (ks,) * len(self.directions.weights)
        ks = tuple(ks)
        if len(ks) != len(self.directions.weights):
            raise SpecError("one kernel per direction atom is required")
        object.__setattr__(self, "kernels", ks)
        grid = self.check_grid if self.check_grid is not None else np.geomspace(1e-6, 1e8, 300)
        for k in ks:
            v = np.asarray(k(grid), dtype=float)
            if np.any(v < 0) or np.any(np.diff(v) > 1e-10 * v[:-1] + 1e-300):
                raise SpecError(f"kernel {k.name} is not decreasing on the evaluation grid")
        if not self.is_integrable():
            raise SpecError("Lévy integrability int (1 ^ r^2) K(r)/r dr < inf fails")

    @property
    def d(self):
        return self.directions.d

    def is_zero(self) -> bool:
        return all(k.is_zero() for k in self.kernels)

    def K(self, r):
        """K(r) = sum_j w_j k_j(r)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        for w, k in zip(self.directions.weights, self.kernels):
            if not k.is_zero():
                out = out + w * np.asarray(k(r))
        return out if out.ndim else float(out)

    def support_end(self) -> float:
        return max(k.support_end() for k in self.kernels)

    def breakpoints(self) -> np.ndarray:
        pts = [k.breakpoints() for k in self.kernels]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def is_integrable(self) -> bool:
        for k in self.kernels:
            if k.is_zero():
                continue
            if k.lo_exponent >= 2:
                return False
            if k.hi_exponent <= 0 and math.isinf(k.support_end()):
                return False
        val = levy_integral(self)
        return bool(np.isfinite(val))

    def vector_moment(self, weight_fn) -> np.ndarray:
        """sum_j w_j xi_j weight_fn(k_j)."""
        out = np.zeros(self.d)
        for xi, w, k in zip(self.directions.xi, self.directions.weights, self.kernels):
            if not k.is_zero():
                out += w * xi * weight_fn(k)
        return out

    def dilated(self, lam: float) -> "LevyProfile":
        if lam == 1.0:
            return self
        return LevyProfile(self.directions, tuple(k.dilated(lam) for k in self.kernels), self.approximate)

    def to_dict(self):
        return {
            "directions": self.directions.to_dict(),
            "kernels": [k.to_dict() for k in self.kernels],
            "approximate": self.approximate,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            DirectionMeasure.from_dict(doc["directions"]),
            tuple(Kernel.from_dict(k) for k in doc["kernels"]),
            bool(doc.get("approximate", False)),
        )

    @classmethod
    def zero(cls, d=1):
        dirs = DirectionMeasure.symmetric_1d() if d == 1 else DirectionMeasure(np.eye(d)[:1], np.ones(1))
        return cls(dirs, ZeroKernel())


def _u_points(profile, a, b):
    pts = profile.breakpoints()
    pts = pts[(pts > math.exp(a)) & (pts < math.exp(b))] if pts.size else pts
    return np.log(pts)[:100] if pts.size else None


def _kink_edges(profile, a, b):
    nodes = [np.log(k.r) for k in profile.kernels if isinstance(k, TabulatedKernel)]
    nodes += [np.log(k.base.r) + math.log(k.lam) for k in profile.kernels
              if isinstance(k, DilatedKernel) and isinstance(k.base, TabulatedKernel)]
    pts = np.concatenate(nodes + [np.log(profile.breakpoints())]) if nodes else np.log(profile.breakpoints())
    pts = pts[(pts > a) & (pts < b)]
    return np.unique(np.concatenate([[a, b], pts, np.linspace(a, b, 9)]))


def levy_integral(profile: LevyProfile) -> float:
    """int_0^inf min(1, r^2) K(r) / r dr with analytic power-law end pieces."""
    if profile.is_zero():
        return 0.0
    lo, hi = -40.0, 60.0
    body = 0.0
    edges = np.linspace(lo, hi, 21)
    for a, b in zip(edges[:-1], edges[1:]):
        body += quad(
            lambda u: min(1.0, math.exp(2 * u)) * float(profile.K(math.exp(u))),
            a, b, points=_u_points(profile, a, b), strict=False,
        )
    r_lo, r_hi = math.exp(lo), math.exp(hi)
    for w, k in zip(profile.directions.weights, profile.kernels):
        if k.is_zero():
            continue
        p0 = k.lo_exponent
        body += w * float(k(r_lo)) * r_lo**2 / (2 - p0)
        if k.support_end() > r_hi:
            p1 = k.hi_exponent
            body += 0.0 if math.isinf(p1) else w * float(k(r_hi)) / p1
    return body


# --------------------------------------------------------------------------
# marginal models


def stable_kappa(alpha: float) -> float:
    """Lévy density constant of S_alpha(1, 1, 0): nu(dr) = kappa r^{-alpha-1} dr."""
    if abs(alpha - 1.0) < 1e-12:
        return 2.0 / math.pi
    return alpha / (math.gamma(1 - alpha) * math.cos(math.pi * alpha / 2))


def stable_standard(gen: np.random.Generator, alpha: float, beta: float, n: int) -> np.ndarray:
    """Chambers-Mallows-Stuck variates of S_alpha(1, beta, 0)."""
    v = gen.uniform(-math.pi / 2, math.pi / 2, n)
    w = gen.standard_exponential(n)
    if abs(alpha - 1.0) < 1e-12:
        pb = math.pi / 2 + beta * v
        return (2 / math.pi) * (pb * np.tan(v) - beta * np.log((math.pi / 2) * w * np.cos(v) / pb))
    t = beta * math.tan(math.pi * alpha / 2)
    b = math.atan(t) / alpha
    s = (1 + t * t) ** (1 / (2 * alpha))
    return (
        s
        * np.sin(alpha * (v + b))
        / np.cos(v) ** (1 / alpha)
        * (np.cos(v - alpha * (v + b)) / w) ** ((1 - alpha) / alpha)
    )


def stable_scaled(gen, alpha, sigma, n):
    """S_alpha(sigma, 1, 0) variates."""
    z = stable_standard(gen, alpha, 1.0, n)
    if abs(alpha - 1.0) < 1e-12:
        return sigma * z + (2 / math.pi) * sigma * math.log(sigma)
    return sigma * z


class MarginalModel:
    """Selfdecomposable law of X(1)."""

    name = "marginal"
    has_density = False
    exact_mu = False
    exact_rho = False
    approximate_profile = False
    support = "R"
    fixed_H: float | None = None

    def validate(self, d: int):
        if d != 1:
            raise SpecError(f"{self.name} marginal is one-dimensional")

    def profile(self, d: int) -> LevyProfile:
        raise NotImplementedError

    def density(self, x):
        raise DensityUnavailable(f"{self.name} has no closed-form density")

    def tail_prob(self, r):
        """P(|X| > r) when a closed form exists."""
        raise DensityUnavailable(f"{self.name} has no closed-form tail")

    def sample(self, gen: np.random.Generator, n: int, d: int) -> np.ndarray:
        raise SamplerUnavailable(f"{self.name} has no exact sampler")

    def K_family(self) -> TailFamily | None:
        return None

    def mu_tail_family(self) -> TailFamily | None:
        return None

    def capabilities(self) -> dict:
        return {
            "closed_form_density": self.has_density,
            "exact_mu": self.exact_mu,
            "exact_rho": self.exact_rho,
        }

    def to_dict(self):
        return {"model": self.name, **self._params()}

    def _params(self):
        return {k: io.encode_scalar(getattr(self, k)) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(doc) -> "MarginalModel":
        doc = dict(doc)
        cls = _MARGINALS[doc.pop("model")]
        return cls._from_params(doc)

    @classmethod
    def _from_params(cls, doc):
        return cls(**{k: io.decode_scalar(v) for k, v in doc.items()})


def _asymptotic_kernel(rp, r_mode, r_max, n=1200):
    """Tabulated kernel r p(r) beyond the mode, flat below it."""
    r = np.geomspace(r_mode, r_max, n)
    v = np.maximum.accumulate(np.asarray(rp(r), float)[::-1])[::-1]
    keep = v > 1e-300
    return TabulatedKernel(r[keep], v[keep], lo_exp=0.0)


@dataclass(frozen=True, eq=False)
class Stable(MarginalModel):
    alpha: float
    spectral: DirectionMeasure = None
    scale: float = 1.0
    name = "Stable"
    exact_mu = True
    exact_rho = True

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise SpecError("stable alpha must lie in (0, 2)")
        if not self.scale > 0:
            raise SpecError("stable scale must be positive")
        if self.spectral is None:
            object.__setattr__(self, "spectral", DirectionMeasure.symmetric_1d())
        if abs(self.alpha - 1) < 1e-12 and not self.spectral.is_balanced():
            raise SpecError("alpha = 1 requires a balanced spectral measure (strict stability)")

    @property
    def has_density(self):
        return abs(self.alpha - 1) < 1e-12 and self.spectral.d == 1

    def validate(self, d):
        if self.spectral.d != d:
            raise SpecError("spectral measure dimension differs from d")

    def atom_scales(self) -> np.ndarray:
        return self.spectral.normalized ** (1 / self.alpha) * self.scale

    def profile(self, d):
        c = stable_kappa(self.alpha) * self.scale**self.alpha
        return LevyProfile(DirectionMeasure(self.spectral.xi, self.spectral.normalized), PowerKernel(self.alpha, c))

    def density(self, x):
        if not self.has_density:
            raise DensityUnavailable("stable density is closed-form only for alpha = 1, d = 1")
        return stats.cauchy.pdf(np.asarray(x, float), scale=self.scale)

    def tail_prob(self, r):
        if not self.has_density:
            raise DensityUnavailable("stable tail is closed-form only for alpha = 1, d = 1")
        return 2 * stats.cauchy.sf(np.asarray(r, float), scale=self.scale)

    def sample(self, gen, n, d, scale_factor=1.0):
        out = np.zeros((n, d))
        for xi, sig in zip(self.spectral.xi, self.atom_scales() * scale_factor):
            out += np.outer(stable_scaled(gen, self.alpha, sig, n), xi)
        return out

    def K_family(self):
        return PowerLog(stable_kappa(self.alpha) * self.scale**self.alpha, self.alpha, 0.0)

    def mu_tail_family(self):
        return PowerLog(stable_kappa(self.alpha) * self.scale**self.alpha / self.alpha, self.alpha, 0.0)

    def _params(self):
        return {"alpha": self.alpha, "scale": self.scale, "spectral": self.spectral.to_dict()}

    @classmethod
    def _from_params(cls, doc):
        return cls(doc["alpha"], DirectionMeasure.from_dict(doc["spectral"]), doc.get("scale", 1.0))


_PHI0 = 1 / math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class Lognormal(MarginalModel):
    name = "Lognormal"
    has_density = True
    exact_mu = True
    approximate_profile = True
    support = "R+"

    def density(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, _PHI0 * np.exp(-0.5 * np.log(np.where(x > 0, x, 1.0)) ** 2) / np.where(x > 0, x, 1.0), 0.0)
        return out

    def tail_prob(self, r):
        r = np.asarray(r, float)
        return stats.norm.sf(np.log(r))

    def sample(self, gen, n, d):
        return np.exp(gen.standard_normal((n, 1)))

    def profile(self, d):
        k = _asymptotic_kernel(lambda r: _PHI0 * np.exp(-0.5 * np.log(r) ** 2), 1.0, math.exp(37.0))
        return LevyProfile(DirectionMeasure.positive_1d(), k, approximate=True)

    def K_family(self):
        return Stretched(_PHI0, 0.5, 0.0)

    def mu_tail_family(self):
        return Stretched(_PHI0, 0.5, 1.0)

    def _params(self):
        return {}


@dataclass(frozen=True)
class StudentT(MarginalModel):
    """Density Gamma((m+1)/2) / (sqrt(pi) Gamma(m/2)) (1 + x^2)^{-(m+1)/2}."""

    m: float
    name = "StudentT"
    has_density = True
    exact_mu = True
    approximate_profile = True

    def __post_init__(self):
        if not self.m > 0:
            raise SpecError("StudentT parameter m must be positive")

    @property
    def const(self):
        m = self.m
        return math.exp(special.gammaln((m + 1) / 2) - special.gammaln(m / 2)) / math.sqrt(math.pi)

    def density(self, x):
        x = np.asarray(x, float)
        return self.const * (1 + x * x) ** (-(self.m + 1) / 2)

    def tail_prob(self, r):
        return 2 * stats.t.sf(np.asarray(r, float) * math.sqrt(self.m), self.m)

    def sample(self, gen, n, d):
        return (gen.standard_t(self.m, n) / math.sqrt(self.m))[:, None]

    def profile(self, d):
        c = self.const
        k = _asymptotic_kernel(lambda r: 2 * c * r * (1 + r * r) ** (-(self.m + 1) / 2), 1 / math.sqrt(self.m), 1e150)
        return LevyProfile(DirectionMeasure.symmetric_1d(), k, approximate=True)

    def K_family(self):
        return PowerLog(2 * self.const, self.m, 0.0)

    def mu_tail_family(self):
        return PowerLog(2 * self.const / self.m, self.m, 0.0)


@dataclass(frozen=True)
class Weibull(MarginalModel):
    """Density alpha x^{alpha-1} exp(-x^alpha) on R+, 0 < alpha <= 1."""

    alpha: float
    name = "Weibull"
    has_density = True
    exact_mu = True
    support = "R+"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise SpecError("Weibull alpha must lie in (0, 1] for selfdecomposability")

    @property
    def approximate_profile(self):
        return self.alpha < 1

    def density(self, x):
        x = np.asarray(x, float)
        xp = np.where(x > 0, x, 1.0)
        return np.where(x > 0, self.alpha * xp ** (self.alpha - 1) * np.exp(-(xp**self.alpha)), 0.0)

    def tail_prob(self, r):
        return np.exp(-(np.asarray(r, float) ** self.alpha))

    def sample(self, gen, n, d):
        return (gen.standard_exponential(n) ** (1 / self.alpha))[:, None]

    def profile(self, d):
        if self.alpha == 1.0:
            # Exp(1) = Gamma(1): exact Lévy density e^{-r}/r
            return LevyProfile(DirectionMeasure.positive_1d(), ExpTiltedKernel(0.0, 1.0))
        a = self.alpha
        r_max = (700.0) ** (1 / a)
        k = _asymptotic_kernel(lambda r: a * r**a * np.exp(-(r**a)), 1.0, r_max)
        return LevyProfile(DirectionMeasure.positive_1d(), k, approximate=True)

    def K_family(self):
        return LogWeibull(1.0, self.alpha, 0.0)

    def mu_tail_family(self):
        return LogWeibull(1.0, self.alpha, 0.0)


@dataclass(frozen=True)
class BesselHit(MarginalModel):
    """Law of T_1 = inf{t : |B(t)| = 1} for Brownian motion in R^bm_dim."""

    bm_dim: int
    n_series: int = 400
    name = "BesselHit"
    exact_mu = True
    support = "R+"
    fixed_H = 2.0

    def __post_init__(self):
        if int(self.bm_dim) != self.bm_dim or self.bm_dim < 2:
            raise SpecError("BesselHit needs integer bm_dim >= 2")

    @property
    def nu(self):
        return self.bm_dim / 2 - 1

    def profile(self, d):
        return LevyProfile(DirectionMeasure.positive_1d(), BesselHitKernel(self.nu))

    def sample(self, gen, n, d):
        # T_1 = sum_n 2 E_n / j_n^2; the truncated remainder is replaced by its
        # mean, fixed by the identity sum_n 2/j_n^2 = 1/bm_dim.
        j2 = bessel_zeros(float(self.nu), self.n_series) ** 2
        rem = 1.0 / self.bm_dim - float(np.sum(2 / j2))
        out = np.empty(n)
        step = max(1, 2_000_000 // self.n_series)
        for s in range(0, n, step):
            e = gen.standard_exponential((min(n, s + step) - s, self.n_series))
            out[s : s + e.shape[0]] = (2 * e / j2).sum(axis=1) + rem
        return out[:, None]

    def K_family(self):
        j1 = float(bessel_zeros(float(self.nu), 1)[0])
        return LogWeibull(j1 * j1 / 2, 1.0, 0.0)

    mu_tail_family = K_family


@dataclass(frozen=True)
class BesselLastExit(MarginalModel):
    """Law of L_1 = sup{t : |B(t)| = 1}, bm_dim >= 3; L_1 = 1/(2 G), G ~ Gamma(nu)."""

    bm_dim: int
    name = "BesselLastExit"
    exact_mu = True
    has_density = True
    support = "R+"
    fixed_H = 2.0

    def __post_init__(self):
        if int(self.bm_dim) != self.bm_dim or self.bm_dim < 3:
            raise SpecError("BesselLastExit needs integer bm_dim >= 3")

    @property
    def nu(self):
        return self.bm_dim / 2 - 1

    @property
    def approximate_profile(self):
        return self.bm_dim != 3

    def density(self, x):
        x = np.asarray(x, float)
        xp = np.where(x > 0, x, 1.0)
        dens = stats.gamma.pdf(1 / (2 * xp), self.nu) / (2 * xp * xp)
        return np.where(x > 0, dens, 0.0)

    def tail_prob(self, r):
        return stats.gamma.cdf(1 / (2 * np.asarray(r, float)), self.nu)

    def sample(self, gen, n, d):
        return (0.5 / gen.standard_gamma(self.nu, n))[:, None]

    def profile(self, d):
        nu = self.nu
        c = nu * 2.0 ** (-nu) / math.gamma(nu + 1)
        return LevyProfile(DirectionMeasure.positive_1d(), PowerKernel(nu, c), approximate=self.bm_dim != 3)

    def K_family(self):
        nu = self.nu
        return PowerLog(nu * 2.0 ** (-nu) / math.gamma(nu + 1), nu, 0.0)

    def mu_tail_family(self):
        nu = self.nu
        return PowerLog(2.0 ** (-nu) / math.gamma(nu + 1), nu, 0.0)


@dataclass(frozen=True, eq=False)
class Custom(MarginalModel):
    profile_: LevyProfile = None
    k_family: TailFamily | None = None
    name = "Custom"

    def validate(self, d):
        if self.profile_.d != d:
            raise SpecError("profile dimension differs from d")

    def profile(self, d):
        return self.profile_

    @property
    def approximate_profile(self):
        return self.profile_.approximate

    def K_family(self):
        if self.k_family is not None:
            return self.k_family
        ks = [k for k in self.profile_.kernels if not k.is_zero()]
        if not ks:
            return None
        end = self.profile_.support_end()
        if math.isfinite(end):
            return Vanishing(end, float(self.profile_.K(end * (1 - 1e-12))))
        w = self.profile_.directions.weights
        if all(isinstance(k, PowerKernel) for k in ks) and len({k.alpha for k in ks}) == 1:
            c = sum(wi * k.c for wi, k in zip(w, self.profile_.kernels) if not k.is_zero())
            return PowerLog(c, ks[0].alpha, 0.0)
        return None

    def _params(self):
        return {
            "profile": self.profile_.to_dict(),
            "k_family": None if self.k_family is None else self.k_family.to_dict(),
        }

    @classmethod
    def _from_params(cls, doc):
        fam = doc.get("k_family")
        return cls(LevyProfile.from_dict(doc["profile"]), None if fam is None else TailFamily.from_dict(fam))


_MARGINALS = {c.name: c for c in (Stable, Lognormal, StudentT, Weibull, BesselHit, BesselLastExit, Custom)}


# --------------------------------------------------------------------------
# process specification


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Sato process with exponent H whose X(1) has law ``marginal``.

    ``gaussian_part`` and ``drift`` complete the generating triplet of
    Custom marginals.  ``dilation`` replaces X by dilation * X.
    """

    H: float
    d: int
    marginal: MarginalModel
    gaussian_part: np.ndarray | None = None
    drift: np.ndarray | None = None
    dilation: float = 1.0

    def __post_init__(self):
        if not (self.H > 0 and math.isfinite(self.H)):
            raise SpecError("H must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise SpecError("d must be a positive integer")
        if not self.dilation > 0:
            raise SpecError("dilation must be positive")
        m = self.marginal
        m.validate(self.d)
        if m.fixed_H is not None and abs(self.H - m.fixed_H) > 1e-12:
            raise SpecError(f"{m.name} processes are {m.fixed_H}-selfsimilar")
        if (self.gaussian_part is not None or self.drift is not None) and not isinstance(m, Custom):
            raise SpecError("gaussian_part and drift complete Custom marginals only")
        if self.gaussian_part is not None:
            A = np.atleast_2d(np.asarray(self.gaussian_part, float))
            if A.shape != (self.d, self.d) or not np.allclose(A, A.T, atol=1e-12):
                raise SpecError("gaussian_part must be a symmetric d x d matrix")
            try:
                np.linalg.cholesky(A + (1e-12 * max(1.0, np.trace(A))) * np.eye(self.d))
            except np.linalg.LinAlgError as exc:
                raise SpecError("gaussian_part is not nonnegative-definite") from exc
            A.setflags(write=False)
            object.__setattr__(self, "gaussian_part", A)
        if self.drift is not None:
            g = np.asarray(self.drift, float).ravel()
            if g.shape != (self.d,):
                raise SpecError("drift must be a vector in R^d")
            g.setflags(write=False)
            object.__setattr__(self, "drift", g)
        if self.is_deterministic():
            raise SpecError("deterministic specs are excluded (zero Lévy measure and zero Gaussian part)")

    def is_deterministic(self) -> bool:
        if not isinstance(self.marginal, Custom):
            return False
        A = self.gaussian_part
        return self.marginal.profile_.is_zero() and (A is None or not np.any(A))

    def is_gaussian(self) -> bool:
        return isinstance(self.marginal, Custom) and self.marginal.profile_.is_zero()

    def A(self) -> np.ndarray:
        A = np.zeros((self.d, self.d)) if self.gaussian_part is None else self.gaussian_part
        return A * self.dilation**2

    def gamma(self) -> np.ndarray:
        g = np.zeros(self.d) if self.drift is None else self.drift
        return g * self.dilation

    def profile(self) -> LevyProfile:
        return self.marginal.profile(self.d).dilated(self.dilation)

    def K(self, r):
        return self.profile().K(r)

    def K_family(self) -> TailFamily | None:
        if self.is_gaussian():
            return Vanishing(0.0 + 1e-300, 0.0)
        fam = self.marginal.K_family()
        return None if fam is None else fam.dilated(self.dilation)

    def mu_tail_family(self):
        fam = self.marginal.mu_tail_family()
        return None if fam is None else fam.dilated(self.dilation)

    def support_end(self) -> float:
        """inf{r : K(r) = 0}."""
        if self.is_gaussian():
            return 0.0
        fam = self.K_family()
        if isinstance(fam, Vanishing):
            return fam.cutoff
        return self.profile().support_end()

    @property
    def has_density(self):
        return self.d == 1 and self.marginal.has_density

    def density(self, x):
        if not self.has_density:
            raise DensityUnavailable(f"{self.marginal.name} has no closed-form density")
        lam = self.dilation
        return self.marginal.density(np.asarray(x, float) / lam) / lam

    def tail_prob(self, r):
        return self.marginal.tail_prob(np.asarray(r, float) / self.dilation)

    def to_dict(self):
        return {
            "H": self.H,
            "d": self.d,
            "marginal": self.marginal.to_dict(),
            "gaussian_part": None if self.gaussian_part is None else [io.encode_array(r) for r in self.gaussian_part],
            "drift": None if self.drift is None else io.encode_array(self.drift),
            "dilation": self.dilation,
        }

    @classmethod
    def from_dict(cls, doc):
        A = doc.get("gaussian_part")
        g = doc.get("drift")
        return cls(
            float(doc["H"]),
            int(doc["d"]),
            MarginalModel.from_dict(doc["marginal"]),
            None if A is None else np.array([io.decode_array(r) for r in A]),
            None if g is None else io.decode_array(g),
            float(doc.get("dilation", 1.0)),
        )


def gaussian_spec(A, H=1.0) -> ProcessSpec:
    A = np.atleast_2d(np.asarray(A, float))
    d = A.shape[0]
    return ProcessSpec(H, d, Custom(LevyProfile.zero(d)), gaussian_part=A)


# --------------------------------------------------------------------------
# tail functions


def K_of_r(profile: LevyProfile, r):
    """K(r) = sum over atoms of weight * k(r)."""
    if np.any(np.asarray(r) <= 0):
        raise ValueError("r must be positive")
    return profile.K(r)


def eta_l_tail(profile: LevyProfile, l: int, H: float, r):
    """eta_l(|x| > r) = int_r^{e^{lH} r} K(s)/s ds, by adaptive quadrature in log s."""
    if l < 1 or int(l) != l:
        raise ValueError("l must be a positive integer")
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rs <= 0):
        raise ValueError("r must be positive")
    if profile.is_zero():
        out = np.zeros(rs.shape)
    else:
        out = np.empty(rs.shape)
        end = profile.support_end()
        span = l * H
        for i, ri in enumerate(rs):
            a = math.log(ri)
            b = min(a + span, math.log(end)) if math.isfinite(end) else a + span
            if b <= a:
                out[i] = 0.0
                continue
            f = lambda u: float(profile.K(math.exp(u)))  # noqa: E731
            try:
                out[i] = quad(f, a, b, points=_u_points(profile, a, b))
            except QuadratureFailure:
                # tabulated kernels have a kink at every node; integrate node by node
                edges = _kink_edges(profile, a, b)
                out[i] = sum(quad(f, x0, x1) for x0, x1 in zip(edges[:-1], edges[1:]))
    return out if np.ndim(r) else float(out[0])


def L_of_r(spec: ProcessSpec, r: float, n_mc: int = 100_000, rng=None):
    """L(r) = P(r < |X(1)| <= e^{3H} r) as (estimate, standard error)."""
    if r <= 0:
        raise ValueError("r must be positive")
    hi = math.exp(3 * spec.H) * r
    if spec.has_density:
        lam = spec.dilation

        def mass(a, b):
            # integrate x p(x) in log x so wide intervals stay well resolved
            f = lambda u: math.exp(u) * float(spec.density(math.exp(u)))
            return quad(f, math.log(a), math.log(b))

        est = mass(r, hi)
        if spec.marginal.support == "R":
            est += quad(lambda u: math.exp(u) * float(spec.density(-math.exp(u))), math.log(r), math.log(hi))
        del lam
        return est, 0.0
    from .sampler import sample_marginal  # runtime import: sampler depends on this module

    x = sample_marginal(spec, as_stream(rng).child("L_of_r"), n_mc)
    a = np.linalg.norm(x, axis=1)
    p = float(np.mean((a > r) & (a <= hi)))
    return p, math.sqrt(max(p * (1 - p), 0.0) / n_mc)


def M_of_r(spec: ProcessSpec, r):
    """Spherical average of the density at radius r ((p(r) + p(-r))/2 for d = 1)."""
    if not spec.has_density:
        raise DensityUnavailable(f"{spec.marginal.name} exposes no closed-form density")
    r = np.asarray(r, float)
    out = 0.5 * (spec.density(r) + spec.density(-r))
    return out if out.ndim else float(out)


def K_tailfn(spec_or_profile, r_min=1e-2, r_max=1e12, n=400) -> TailFn:
    """K as a TailFn, carrying the marginal's asymptotic family when known."""
    if isinstance(spec_or_profile, ProcessSpec):
        prof, fam = spec_or_profile.profile(), spec_or_profile.K_family()
    else:
        prof, fam = spec_or_profile, None
    r = np.geomspace(r_min, r_max, n)
    return TailFn("K", r, prof.K(r), fam, "K")
