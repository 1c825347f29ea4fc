"""Principal-value quadrature on R and R^2, and distributions built from it.

The one-dimensional principal value is computed in symmetric form

    pv int f(s)/(s-c) ds = int_0^U (f(c+u) - f(c-u))/u du,

whose integrand is smooth at u = 0.  The integral is still evaluated on an
excision ladder eps_k = 2^-k and Richardson-extrapolated to eps -> 0, so the
spread of the ladder gives an error estimate.

``D`` is the iterated principal value of psi(s)/(s2^2 - s1^2) taken as inner
integrals in s1 (poles at -s2 and s2) followed by the s2 integral.  ``D_R``
integrates D over the pullbacks of a test function on G along the maps Q_b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .group_core import P_of_b, as_matrix, beta, rep_Z, rotation, shear

ArrayFn = Callable[..., np.ndarray]


class QuadratureError(ValueError):
    """Raised when an integrand produces non-finite samples."""


@dataclass(frozen=True)
class PVConfig:
    k_min: int = 3
    k_max: int = 16
    U: float = 8.0
    order: int = 12
    panel: float = 0.5
    extrapolation_order: int = 2

    def __post_init__(self):
        if not (self.k_max > self.k_min >= 0):
            raise ValueError("need k_max > k_min >= 0")
        if not self.U > 1:
            raise ValueError("truncation radius U must exceed 1")
        if self.order < 2 or self.panel <= 0:
            raise ValueError("bad panel rule")
        if not 0 <= self.extrapolation_order < self.k_max - self.k_min + 1:
            raise ValueError("extrapolation order too large for the ladder")

    def refined(self) -> "PVConfig":
        return PVConfig(self.k_min, self.k_max + 2, 2 * self.U, self.order, self.panel, self.extrapolation_order)


@dataclass(frozen=True)
class PVResult:
    value: complex
    error_estimate: float

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")


@dataclass(frozen=True)
class TestFunction2D:
    """psi on R^2; ``evaluator(s1, s2)`` broadcasts over arrays."""

    __test__ = False

    evaluator: ArrayFn
    decay_radius: float

    def __call__(self, s1, s2):
        return self.evaluator(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float))

    def swapped(self) -> "TestFunction2D":
        f = self.evaluator
        return TestFunction2D(lambda s1, s2: f(s2, s1), self.decay_radius)


@dataclass(frozen=True)
class GFactors:
    """phi(A, u, t) = fA(A) fu(u) ft(t); ``u_invariant`` if fu depends on |u| only."""

    fA: ArrayFn
    fu: ArrayFn
    ft: ArrayFn
    u_invariant: bool = False


@dataclass(frozen=True)
class GTestFunction:
    """Test function on G_n in the coordinates (A, u, t).

    ``evaluator(A, u, t)`` takes A of shape (..., 2, 2), u of shape (..., 2n)
    and t of shape (...), broadcasting the leading axes.  The function is
    declared to vanish unless max|A_ij| <= a_radius, |u| <= u_radius and
    |t| <= t_radius.
    """

    __test__ = False

    evaluator: ArrayFn
    n: int
    a_radius: float = math.inf
    u_radius: float = math.inf
    t_radius: float = math.inf
    factors: Optional[GFactors] = None

    def __call__(self, A, u, t):
        return self.evaluator(as_matrix(A), np.asarray(u, dtype=float), np.asarray(t, dtype=float))

    @classmethod
    def separable(cls, fA, fu, ft, n: int, *, u_invariant: bool = False, **box) -> "GTestFunction":
        def ev(A, u, t):
            return fA(A) * fu(u) * ft(t)

        return cls(ev, n, factors=GFactors(fA, fu, ft, u_invariant), **box)


def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def panel_nodes(a: float, b: float, width: float, order: int):
    """Gauss-Legendre nodes and weights on [a, b] split into equal panels of width <= ``width``."""
    if b <= a:
        return np.empty(0), np.empty(0)
    npan = max(1, int(math.ceil((b - a) / width - 1e-12)))
    x, w = _gl(order)
    edges = np.linspace(a, b, npan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _ladder_rule(cfg: PVConfig, U: float):
    """Nodes on [eps_kmax, U] and, per node, the index of the ladder level that first includes it.

    Level 0 covers [eps_kmin, U]; level L covers [eps_{kmin+L}, eps_{kmin+L-1}].
    """
    e0 = 2.0 ** -cfg.k_min
    nodes, weights = panel_nodes(e0, U, cfg.panel, cfg.order)
    levels = [np.zeros(nodes.size, dtype=int)]
    parts_x, parts_w = [nodes], [weights]
    x, w = _gl(cfg.order)
    for L, k in enumerate(range(cfg.k_min + 1, cfg.k_max + 1), start=1):
        lo, hi = 2.0 ** -k, 2.0 ** -(k - 1)
        parts_x.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
        parts_w.append(0.5 * (hi - lo) * w)
        levels.append(np.full(x.size, L))
    return np.concatenate(parts_x), np.concatenate(parts_w), np.concatenate(levels)


def _richardson(ladder: np.ndarray, order: int):
    """Extrapolate I(eps_k) along the last axis to eps = 0.

    The symmetric integrand is even in u, so I(eps) = I(0) - g(0) eps - g''(0) eps^3/6 - ...;
    successive eliminations remove the eps^1, eps^3, ... terms.
    Returns (value, error) where error is the largest successive difference in
    the final column.
    """
    col = ladder
    for j in range(order):
        f = 2.0 ** (2 * j + 1)
        col = (f * col[..., 1:] - col[..., :-1]) / (f - 1.0)
    if col.shape[-1] >= 2:
        err = np.max(np.abs(np.diff(col[..., -3:], axis=-1)), axis=-1)
    else:
        err = np.abs(col[..., -1] - ladder[..., -1])
    return col[..., -1], err


def _pv_from_samples(fp: np.ndarray, fm: np.ndarray, nodes, weights, levels, cfg: PVConfig):
    """Symmetric-form pv from samples f(c+u), f(c-u) on the ladder nodes (last axis)."""
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise QuadratureError("non-finite integrand samples")
    g = (fp - fm) / nodes * weights
    nlev = cfg.k_max - cfg.k_min + 1
    per_level = np.stack([g[..., levels == L].sum(axis=-1) for L in range(nlev)], axis=-1)
    ladder = np.cumsum(per_level, axis=-1)
    return _richardson(ladder, cfg.extrapolation_order)


def pv_1d(f: ArrayFn, c: float, cfg: PVConfig = PVConfig()) -> PVResult:
    """Principal value of int f(s)/(s - c) ds, truncated to |s - c| <= cfg.U."""
    nodes, weights, levels = _ladder_rule(cfg, cfg.U)
    with np.errstate(all="ignore"):
        fp = np.asarray(f(c + nodes), dtype=complex)
        fm = np.asarray(f(c - nodes), dtype=complex)
    val, err = _pv_from_samples(fp, fm, nodes, weights, levels, cfg)
    return PVResult(complex(val), float(err))


def D_dist(psi: TestFunction2D, cfg: PVConfig = PVConfig(), chunk: int = 64) -> PVResult:
    """Iterated principal value of psi(s1, s2)/(s2^2 - s1^2), inner integral in s1."""
    r = float(psi.decay_radius)
    U_in = max(cfg.U, 2.0 * r)
    u, wu, lev = _ladder_rule(cfg, U_in)
    eps = 2.0 ** -cfg.k_max
    # outer rule: geometric panels down to eps (the outer integrand is only
    # piecewise smooth at s2 = 0), uniform panels beyond 2^-k_min
    s2, w2, _ = _ladder_rule(cfg, max(r, 2.0 ** (1 - cfg.k_min)))
    order = np.argsort(s2)
    s2, w2 = s2[order], w2[order]
    s2 = np.concatenate([-s2[::-1], s2])
    w2 = np.concatenate([w2[::-1], w2])
    F = np.empty(s2.size, dtype=complex)
    E = np.empty(s2.size)
    for lo in range(0, s2.size, chunk):
        s = s2[lo:lo + chunk, None]
        with np.errstate(all="ignore"):
            # pole at s1 = -s2 contributes +pv, pole at s1 = +s2 contributes -pv
            vm, em = _pv_from_samples(np.asarray(psi(-s + u, s), dtype=complex),
                                      np.asarray(psi(-s - u, s), dtype=complex), u, wu, lev, cfg)
            vp, ep = _pv_from_samples(np.asarray(psi(s + u, s), dtype=complex),
                                      np.asarray(psi(s - u, s), dtype=complex), u, wu, lev, cfg)
        F[lo:lo + chunk] = (vm - vp) / (2.0 * s[:, 0])
        E[lo:lo + chunk] = (em + ep) / (2.0 * np.abs(s[:, 0]))
    # the omitted strip |s2| < eps: midpoint value from the innermost nodes,
    # error from the local slope of the outer integrand
    h = s2.size // 2
    strip = eps * (F[h - 1] + F[h])
    slope = max(abs(F[h + 1] - F[h]) / (s2[h + 1] - s2[h]), abs(F[h - 1] - F[h - 2]) / (s2[h - 1] - s2[h - 2]))
    strip_err = eps * (abs(F[h] - F[h - 1]) + 2.0 * eps * slope)
    value = np.sum(w2 * F) + strip
    return PVResult(complex(value), float(np.sum(w2 * E) + strip_err))


def D_tilde(psi: TestFunction2D, cfg: PVConfig = PVConfig()) -> PVResult:
    return D_dist(psi.swapped(), cfg)


def fubini_defect(psi: TestFunction2D, cfg: PVConfig = PVConfig()) -> float:
    """|D(psi) + D~(psi) - pi^2 psi(0,0)|."""
    d = D_dist(psi, cfg).value + D_tilde(psi, cfg).value
    return float(abs(d - math.pi ** 2 * complex(psi(0.0, 0.0))))


def Qb_vectors(b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Images of e_n and e_{n+1}/beta(b) under Z(n_{b/2})."""
    P = P_of_b(b / 2.0, n)
    return P[:, n - 1].copy(), P[:, n] / float(beta(b))


def Qb_pullback(phi: GTestFunction, b: float, n: int) -> TestFunction2D:
    """(s1, s2) -> phi(n_b, Z(n_{b/2})(s1 e_n + s2 e_{n+1}/beta(b)), 0)."""
    if phi.n != n:
        raise ValueError("dimension mismatch")
    v1, v2 = Qb_vectors(b, n)
    A = shear(b).matrix
    # |P(b/2) s'| >= |s'|/||P(-b/2)||, so the pullback vanishes beyond this radius
    radius = float(beta(b)) * np.linalg.norm(P_of_b(-b / 2.0, n), 2) * phi.u_radius

    def ev(s1, s2):
        u = s1[..., None] * v1 + s2[..., None] * v2
        return phi.evaluator(A, u, np.zeros(np.shape(u)[:-1]))

    return TestFunction2D(ev, radius)


def D_R_eval(phi: GTestFunction, R: float, n: int, cfg: PVConfig = PVConfig(),
             b_order: int = 2, pullback_radius: Optional[float] = None,
             b_width: Optional[float] = None) -> PVResult:
    """int_{-R}^{R} D(Q_b^* phi) db / beta(b) on Gauss-Legendre panels of width min(0.25, R/64).

    ``pullback_radius`` overrides the decay radius derived from phi's box and
    ``b_width`` the panel width in b.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    bs, wb = panel_nodes(-R, R, b_width or min(0.25, R / 64.0), b_order)
    total = 0j
    err = 0.0
    for b, w in zip(bs, wb):
        psi = Qb_pullback(phi, float(b), n)
        if pullback_radius is not None:
            psi = TestFunction2D(psi.evaluator, pullback_radius)
        if not math.isfinite(psi.decay_radius):
            raise ValueError("test function needs a finite u_radius or an explicit pullback_radius")
        res = D_dist(psi, cfg)
        total += w * res.value / float(beta(b))
        err += w * res.error_estimate / float(beta(b))
    return PVResult(complex(total), float(err))


def _rotations(m: int) -> np.ndarray:
    return np.stack([rotation(2.0 * math.pi * i / m).matrix for i in range(m)])


def k_average(phi: GTestFunction, m: int = 32) -> GTestFunction:
    """Average of phi(k x k') over the uniform m-point grids on SO(2) x SO(2).

    (k, 0, 0)(A, u, t)(k', 0, 0) = (k A k', Z(k) u, t).
    """
    if m < 8:
        raise ValueError("need at least 8 angular points")
    Ks = _rotations(m)
    Zs = rep_Z(Ks, phi.n)
    base = phi.evaluator
    fac = phi.factors

    def both_sides(A):
        # (m, m, ..., 2, 2): K_i A K_j
        A = np.asarray(A)
        Ai = np.einsum("iab,...bc->i...ac", Ks, A)
        return np.einsum("i...ab,jbc->ij...ac", Ai, Ks)

    if fac is not None:
        def ev(A, u, t):
            KAK = both_sides(A)
            fa = np.asarray(fac.fA(KAK))  # (m, m, ...)
            if fac.u_invariant:
                return fa.mean(axis=(0, 1)) * fac.fu(u) * fac.ft(t)
            # mean_i fu(Z(K_i) u) * mean_j fA(K_i A K_j)
            out = 0.0
            rowmean = fa.mean(axis=1)
            for i in range(m):
                out = out + rowmean[i] * fac.fu(np.einsum("ab,...b->...a", Zs[i], u))
            return out / m * fac.ft(t)
    else:
        def ev(A, u, t):
            KAK = both_sides(A)
            out = 0.0
            for i in range(m):
                Zu = np.einsum("ab,...b->...a", Zs[i], u)
                for j in range(m):
                    out = out + base(KAK[i, j], Zu, t)
            return out / (m * m)

    # rotations preserve |u| and the Frobenius norm of A
    a_rad = phi.a_radius * 2.0 if math.isfinite(phi.a_radius) else math.inf
    return GTestFunction(ev, phi.n, a_rad, phi.u_radius, phi.t_radius, None)
