"""Special-function helpers not covered directly by scipy."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import optimize, special


@lru_cache(maxsize=64)
def bessel_zeros(nu: float, n: int) -> np.ndarray:
    """First ``n`` positive zeros of J_nu for real nu >= 0.

    Zeros are bracketed by a sign scan (spacing of consecutive zeros exceeds
    2.4 for nu >= 0) and refined with Brent's method.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    zeros = []
    step = 0.5
    a = max(nu, 1e-6)
    fa = special.jv(nu, a)
    while len(zeros) < n:
        b = a + step
        fb = special.jv(nu, b)
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0:
            zeros.append(optimize.brentq(lambda x: special.jv(nu, x), a, b, xtol=1e-14, rtol=1e-15))
        a, fa = b, fb
    out = np.array(zeros[:n])
    out.setflags(write=False)
    return out


def mcmahon_zero(nu: float, k: np.ndarray) -> np.ndarray:
    """McMahon's large-k expansion of the k-th zero of J_nu."""
    beta = (np.asarray(k, dtype=float) + nu / 2 - 0.25) * np.pi
    mu = 4 * nu * nu
    return beta - (mu - 1) / (8 * beta) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * beta) ** 3)


def log_add(a, b):
    """Elementwise log(exp(a) + exp(b)) tolerant of -inf."""
    return np.logaddexp(a, b)


def log_sub(a, b):
    """log(exp(a) - exp(b)) for a >= b; -inf when equal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = b - a
        out = a + np.log1p(-np.exp(d))
    return np.where(np.isneginf(b), a, out)
