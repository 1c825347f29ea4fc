"""Smooth dyadic cutoffs.

eta0 is even, equal to 1 on |s| <= 1/2 and 0 on |s| >= 3/4; on the transition
it is the normalised primitive of exp(-1/(t(1-t))), so eta0' has one sign
interval per side.  eta(s) = eta0(s/2) - eta0(s) lives on 1/2 <= |s| <= 3/2.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .phase import beta

_GL_NODES = 64


def _bump(u):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where((u > 0) & (u < 1), np.exp(-1.0 / (u * (1.0 - u))), 0.0)


@lru_cache(maxsize=None)
def _rule():
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    # normalising constant on the same rule over [0, 1]
    Z = 0.5 * np.sum(w * _bump(0.5 * (1 + x)))
    return x, w, Z


def smooth_step(t):
    """F(t) = int_0^t exp(-1/(u(1-u))) du / int_0^1 (same); 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    x, w, Z = _rule()
    tc = np.clip(t, 0.0, 1.0)
    # integrate over the shorter side for accuracy
    short = np.minimum(tc, 1.0 - tc)
    vals = 0.5 * short[..., None] * _bump(0.5 * short[..., None] * (1 + x)) @ w / Z
    return np.where(tc <= 0.5, vals, 1.0 - vals)


def eta0(s):
    a = np.abs(np.asarray(s, dtype=float))
    out = smooth_step((0.75 - a) / 0.25)
    return np.where(np.isnan(a), 0.0, out)


def eta(s):
    s = np.asarray(s, dtype=float)
    return eta0(s / 2.0) - eta0(s)


def chi_1(x1, j1: int):
    """2^{j1} eta(2^{-j1} x1) / beta(x1)."""
    return 2.0 ** j1 * eta(np.ldexp(np.asarray(x1, dtype=float), -j1)) / beta(x1)


def chi_2(x2, j2: int):
    """2^{j2} eta(2^{-j2} x2) / x2, zero near x2 = 0 (outside the support)."""
    x2 = np.asarray(x2, dtype=float)
    e = eta(np.ldexp(x2, -j2))
    safe = np.where(e != 0.0, x2, 1.0)
    return np.where(e != 0.0, 2.0 ** j2 * e / safe, 0.0)


def chi_j(x1, x2, j1: int, j2: int):
    if j1 <= 0:
        raise ValueError("chi_j needs j1 > 0")
    return chi_1(x1, j1) * chi_2(x2, j2)


def chi_tilde_j(x1, x2, j1: int, j2: int):
    return chi_j(x1, x2, j1, j2) * np.sign(x2)


def dyadic_candidates(v, width: int = 1):
    """Integers j with eta(2^{-j} v) possibly non-zero: floor(log2|v|) + {-width..width}."""
    a = np.abs(np.asarray(v, dtype=float))
    with np.errstate(divide="ignore"):
        k = np.floor(np.log2(np.where(a > 0, a, 1.0))).astype(int)
    return k[..., None] + np.arange(-width, width + 1)
