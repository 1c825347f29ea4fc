"""The subgroup H0 = {(n_b, u, t) : u in V_{n+1}}, its induced representations and Plancherel slices.

Coordinates: V_k is spanned by the first k basis vectors of R^{2n}; an H0
element is stored as (b, u[0..n], t).  The complement S = {(c, v e_{n+1}, 0)}
is identified with R^2 and the abelian normal subgroup H1 = {(0, w, s) : w in V_n}
with R^n x R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .group_core import GroupElement, HeisenbergPoint, P_of_b, compose, shear, symplectic_B
from .phase import PolySpec, beta

__all__ = [
    "RepParams", "H0Element", "StateFunction", "H1Grid",
    "h0_compose", "h0_inverse", "chi", "pi_apply",
    "plancherel_slice", "plancherel_at", "plancherel_transform", "parseval_ratio", "l2_norm_H0",
    "q_poly", "q_prime_poly", "p_from_zeta", "dr_kernel",
]


@dataclass(frozen=True)
class RepParams:
    n: int
    eta: float
    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float).reshape(-1)
        if self.n < 1:
            raise ValueError("n must be positive")
        if z.size != self.n:
            raise ValueError(f"zeta has length {z.size}, expected n={self.n}")
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "eta", float(self.eta))


@dataclass(frozen=True)
class H0Element:
    b: float
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        if u.size < 2:
            raise ValueError("u must have length n+1 >= 2")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.u.size - 1

    def full_u(self) -> np.ndarray:
        out = np.zeros(2 * self.n)
        out[: self.n + 1] = self.u
        return out

    def to_group(self) -> GroupElement:
        return GroupElement(shear(self.b), HeisenbergPoint(self.full_u(), self.t), self.n)

    @classmethod
    def from_group(cls, g: GroupElement, atol: float = 1e-9) -> "H0Element":
        M = g.A.matrix
        if abs(M[0, 0] - 1) > atol or abs(M[1, 1] - 1) > atol or abs(M[1, 0]) > atol:
            raise ValueError("element is not in H0 (A is not an upper shear)")
        if np.abs(g.u[g.n + 1:]).max(initial=0.0) > atol:
            raise ValueError("element is not in H0 (u has components outside V_{n+1})")
        return cls(M[0, 1], g.u[: g.n + 1], g.t)

    def isclose(self, other: "H0Element", atol: float = 1e-10) -> bool:
        return (self.n == other.n and abs(self.b - other.b) <= atol
                and np.allclose(self.u, other.u, atol=atol, rtol=0) and abs(self.t - other.t) <= atol)


def h0_compose(g: H0Element, g2: H0Element) -> H0Element:
    if g.n != g2.n:
        raise ValueError(f"cannot compose H0 elements with n={g.n} and n={g2.n}")
    return H0Element.from_group(compose(g.to_group(), g2.to_group()))


def h0_inverse(g: H0Element) -> H0Element:
    n = g.n
    u = -(P_of_b(-g.b, n) @ g.full_u())
    return H0Element(-g.b, u[: n + 1], -g.t)


def chi(params: RepParams, w, s):
    """exp(i (-1)^n eta s + i <zeta, w>); w has trailing axis of length n."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != params.n:
        raise ValueError(f"w must have trailing length {params.n}")
    return np.exp(1j * ((-1) ** params.n * params.eta * np.asarray(s) + w @ params.zeta))


@dataclass
class StateFunction:
    """A function xi(c, v) on S = R^2 with a support box ((c_lo, c_hi), (v_lo, v_hi))."""

    evaluator: Callable
    box: Tuple[Tuple[float, float], Tuple[float, float]] = ((-math.inf, math.inf), (-math.inf, math.inf))

    def __call__(self, c, v):
        return self.evaluator(np.asarray(c, dtype=float), np.asarray(v, dtype=float))

    def sample(self, cs, vs) -> np.ndarray:
        C, V = np.meshgrid(np.asarray(cs, dtype=float), np.asarray(vs, dtype=float), indexing="ij")
        return np.asarray(self(C, V), dtype=complex)


def _zeta_phase_vectors(n, b, u_full, c, v):
    """<zeta-pairing vector> P(-c)(v e_{n+1} - u) + P(b-c)(u_{n+1} - v) e_{n+1}, first n entries."""
    c = np.asarray(c, dtype=float)
    v = np.asarray(v, dtype=float)
    e = np.zeros(2 * n)
    e[n] = 1.0
    vec1 = v[..., None] * e - u_full
    t1 = np.einsum("...ij,...j->...i", P_of_b(-c, n), vec1)
    t2 = P_of_b(b - c, n)[..., :, n] * (u_full[n] - v)[..., None]
    return (t1 + t2)[..., :n]


def pi_apply(g: H0Element, xi: StateFunction, params: RepParams) -> StateFunction:
    """The induced representation pi_{eta, zeta}(g) acting on xi in L^2(S)."""
    n = params.n
    if g.n != n:
        raise ValueError(f"element has n={g.n}, representation has n={n}")
    b, u, t = g.b, g.full_u(), g.t
    un, un1 = u[n - 1], u[n]
    eta, zeta = params.eta, params.zeta

    def ev(c, v):
        dv = v - un1
        ph = eta * ((-1) ** (n + 1) * t + n * b * dv * dv + un * (2 * v - un1))
        ph = ph + _zeta_phase_vectors(n, b, u, c, v) @ zeta
        return xi(c - b, dv) * np.exp(1j * ph)

    (clo, chi_), (vlo, vhi) = xi.box
    return StateFunction(ev, ((clo + b, chi_ + b), (vlo + un1, vhi + un1)))


def _sigma_z(n, c, v, w, s):
    """Coordinates (b, u[0..n], t) of (c, v e_{n+1}, 0)(0, w, s); w has trailing length n."""
    c = np.asarray(c, dtype=float)
    wf = np.zeros(np.broadcast_shapes(np.shape(c), np.shape(w)[:-1]) + (n + 1,))
    wf[..., :n] = w
    # P(c) maps V_n into V_n; only its top-left n x n block matters
    Pc = P_of_b(c, n)[..., :n, :n]
    u = np.zeros_like(wf)
    u[..., :n] = np.einsum("...ij,...j->...i", Pc, wf[..., :n])
    u[..., n] = v
    # e_{n+1}^T B = (-1)^n e_n^T and (P(c) w)_n = w_n
    t = s + (-1) ** n * v * wf[..., n - 1]
    return np.broadcast_to(c, t.shape), u, t


@dataclass(frozen=True)
class H1Grid:
    """Midpoint grid on H1 = R^n x R: w in [-w_half, w_half]^n, s in [-s_half, s_half]."""

    w_half: float
    s_half: float
    nw: int = 64
    ns: int = 64

    def __post_init__(self):
        if self.nw < 2 or self.ns < 2:
            raise ValueError("need at least two points per axis")

    def axes(self):
        hw, hs = 2 * self.w_half / self.nw, 2 * self.s_half / self.ns
        w = -self.w_half + hw * (np.arange(self.nw) + 0.5)
        s = -self.s_half + hs * (np.arange(self.ns) + 0.5)
        return w, s, hw, hs


def _w_points(w_axis, n):
    mesh = np.meshgrid(*([w_axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _slice_values(Xi_fn, n, c, v, W, s):
    """F[k, l] = Xi(sigma z) at w = W[k], s = s[l]."""
    b, u, t = _sigma_z(n, c, v, W[:, None, :], s[None, :])
    return np.asarray(Xi_fn(b, u, t), dtype=complex)


def plancherel_slice(Xi_fn: Callable, params: RepParams, grid: H1Grid) -> StateFunction:
    """Xi_chi(sigma) = int_{H1} Xi(sigma z) conj(chi(z)) dz by midpoint quadrature over ``grid``.

    ``Xi_fn(b, u, t)`` takes arrays, u with trailing axis n+1.
    """
    n = params.n
    w_axis, s_axis, hw, hs = grid.axes()
    W = _w_points(w_axis, n)
    conj_chi = np.conj(chi(params, W[:, None, :], s_axis[None, :]))
    wt = hw ** n * hs

    def ev(c, v):
        c, v = np.broadcast_arrays(np.asarray(c, dtype=float), np.asarray(v, dtype=float))
        out = np.empty(c.shape, dtype=complex)
        for idx in np.ndindex(c.shape):
            F = _slice_values(Xi_fn, n, c[idx], v[idx], W, s_axis)
            out[idx] = np.sum(F * conj_chi) * wt
        return out

    return StateFunction(ev)


def plancherel_at(Xi_fn: Callable, params: RepParams, grid: H1Grid, g: H0Element) -> complex:
    """Xi_chi(g) = int_{H1} Xi(g z) conj(chi(z)) dz at an arbitrary g in H0."""
    n = params.n
    if g.n != n:
        raise ValueError("dimension mismatch")
    w_axis, s_axis, hw, hs = grid.axes()
    W = _w_points(w_axis, n)
    wf = np.zeros((W.shape[0], 2 * n))
    wf[:, :n] = W
    # (b, u, t)(0, w, s) = (b, u + P(b) w, t + s + u^T B P(b) w)
    Pw = wf @ P_of_b(g.b, n).T
    u = g.full_u() + Pw
    cross = Pw @ (symplectic_B(n).T @ g.full_u())
    t = g.t + s_axis[None, :] + cross[:, None]
    vals = Xi_fn(np.full(t.shape, g.b), u[:, None, : n + 1], t)
    conj_chi = np.conj(chi(params, W[:, None, :], s_axis[None, :]))
    return complex(np.sum(vals * conj_chi) * hw ** n * hs)


def plancherel_transform(Xi_fn: Callable, n: int, sigma_axes: Tuple[np.ndarray, np.ndarray],
                         grid: H1Grid, etas: np.ndarray, zetas: np.ndarray) -> np.ndarray:
    """Xi_chi(c, v) for all (c, v) in sigma_axes and all chi on the (eta, zeta) grid.

    ``zetas`` has shape (m, n).  Returns an array of shape (len(c), len(v), len(etas), m).
    The H1 integral is a direct discrete Fourier sum on ``grid``.
    """
    w_axis, s_axis, hw, hs = grid.axes()
    W = _w_points(w_axis, n)
    zetas = np.asarray(zetas, dtype=float).reshape(-1, n)
    etas = np.asarray(etas, dtype=float)
    Ew = np.exp(-1j * (zetas @ W.T))                                  # (m, Nw)
    Es = np.exp(-1j * (-1) ** n * np.outer(etas, s_axis))             # (k, Ns)
    cs, vs = sigma_axes
    out = np.empty((len(cs), len(vs), len(etas), len(zetas)), dtype=complex)
    for i, c in enumerate(cs):
        for j, v in enumerate(vs):
            F = _slice_values(Xi_fn, n, c, v, W, s_axis)
            out[i, j] = (Es @ F.T @ Ew.T) * (hw ** n * hs)
    return out


def l2_norm_H0(Xi_fn: Callable, n: int, half: Sequence[float], steps: Sequence[float]) -> float:
    """||Xi||_{L^2(H0)} by the midpoint rule on a box in (b, u[0..n], t) coordinates.

    ``half`` and ``steps`` give (b, u, t) half-widths and steps.
    """
    hb, hu, ht = half
    sb, su, st = steps

    def ax(h, s):
        m = max(2, int(math.ceil(2 * h / s)))
        d = 2 * h / m
        return -h + d * (np.arange(m) + 0.5), d

    bax, db = ax(hb, sb)
    uax, du = ax(hu, su)
    tax, dt = ax(ht, st)
    U = _w_points(uax, n + 1)
    total = 0.0
    for b in bax:
        vals = Xi_fn(np.full((U.shape[0], 1), b), U[:, None, :], tax[None, :])
        total += float(np.sum(np.abs(vals) ** 2))
    return math.sqrt(total * db * du ** (n + 1) * dt)


@dataclass
class ParsevalReport:
    ratio: float
    transform_mass: float
    direct_norm_sq: float
    edge_fraction: float = field(default=0.0)


def parseval_ratio(Xi_fn: Callable, n: int, *, sigma_half: float = 4.0, sigma_step: float = 0.5,
                   grid: Optional[H1Grid] = None, eta_half: float = 12.0, zeta_half: float = 30.0,
                   freq_step: float = 0.5, norm_half: Sequence[float] = (4.0, 6.0, 6.0),
                   norm_steps: Sequence[float] = (0.25, 0.25, 0.25)) -> ParsevalReport:
    """int ||Xi_chi||^2 d chi / ||Xi||^2 with d chi = (2 pi)^{-n-1} d eta d zeta.

    Both sides are computed independently: the left by a Riemann sum over a
    uniform (eta, zeta) box, the right by direct quadrature on H0.
    ``edge_fraction`` is the share of transform mass on the frequency box boundary.
    """
    if grid is None:
        grid = H1Grid(5.5, 14.0, 148, 224)
    m = int(round(sigma_half / sigma_step))
    ax = sigma_step * np.arange(-m, m + 1)
    etas = np.arange(-eta_half, eta_half + freq_step / 2, freq_step)
    z1 = np.arange(-zeta_half, zeta_half + freq_step / 2, freq_step)
    zetas = _w_points(z1, n)
    T = plancherel_transform(Xi_fn, n, (ax, ax), grid, etas, zetas)
    dens = np.sum(np.abs(T) ** 2, axis=(0, 1)) * sigma_step ** 2          # (k, m)
    dens = dens.reshape((len(etas),) + (len(z1),) * n)
    scale = (2 * math.pi) ** (-n - 1) * freq_step ** (n + 1)
    mass = float(np.sum(dens)) * scale
    inner = dens[(slice(1, -1),) * (n + 1)]
    edge = 1.0 - float(np.sum(inner)) * scale / mass if mass > 0 else 0.0
    direct = l2_norm_H0(Xi_fn, n, norm_half, norm_steps) ** 2
    return ParsevalReport(mass / direct, mass, direct, edge)


def q_poly(params: RepParams) -> PolySpec:
    """q(b) = n^{-1} <zeta, P(b) e_{n+1}> as a polynomial in b."""
    n = params.n
    # column n+1 of P(b): entry i is a monomial in b of degree n - i (0-based i < n+1),
    # recovered exactly by sampling and fitting
    nodes = np.arange(n + 1, dtype=float) - n / 2
    vals = np.array([params.zeta @ P_of_b(x, n)[:n, n] for x in nodes]) / n
    coeffs = np.linalg.solve(np.vander(nodes, n + 1, increasing=True), vals)
    return PolySpec(tuple(_clean(coeffs)))


def q_prime_poly(params: RepParams) -> PolySpec:
    """<zeta, P(b) e_n> as a polynomial in b."""
    n = params.n
    nodes = np.arange(n + 1, dtype=float) - n / 2
    vals = np.array([params.zeta @ P_of_b(x, n)[:n, n - 1] for x in nodes])
    coeffs = np.linalg.solve(np.vander(nodes, n + 1, increasing=True), vals)
    return PolySpec(tuple(_clean(coeffs)))


def _clean(c, tol=1e-12):
    c = np.asarray(c, dtype=float)
    return np.where(np.abs(c) <= tol * max(1.0, np.abs(c).max()), 0.0, c)


def p_from_zeta(params: RepParams) -> PolySpec:
    """p(t) = 2 q(-t/2)."""
    q = q_poly(params)
    return PolySpec(tuple(2.0 * c for c in q.compose_linear(-0.5).coeffs))


def dr_kernel(params: RepParams, R: float) -> Callable:
    """Kernel of M_q pi_{eta,zeta}[D_R] M_q^{-1} after the change of variables, |eta| = 1.

    pi sin(beta(d) w |eta(x2+y2) + p'(S)|) exp((i n/2)[eta d (x2^2+y2^2) - w p(S)]) chi_R(d) / (beta(d) w)
    with d = x1-y1, w = x2-y2, S = x1+y1; the diagonal w = 0 is filled by continuity.
    """
    if abs(abs(params.eta) - 1.0) > 1e-12:
        raise ValueError("dr_kernel needs |eta| = 1")
    if not R > 0:
        raise ValueError("R must be positive")
    eta, n = params.eta, params.n
    p = p_from_zeta(params)
    dp = p.deriv(1)

    def K(x1, x2, y1, y2):
        d, w, S = x1 - y1, x2 - y2, x1 + y1
        A = np.abs(eta * (x2 + y2) + dp(S))
        bd = beta(d)
        phase = 0.5 * n * (eta * d * (x2 * x2 + y2 * y2) - w * p(S))
        # sin(bd w A)/(bd w) = A sinc(bd w A / pi)
        val = math.pi * A * np.sinc(bd * w * A / math.pi) * np.exp(1j * phase)
        return np.where(np.abs(d) <= R, val, 0.0)

    return K
