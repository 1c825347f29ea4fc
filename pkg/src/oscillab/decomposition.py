"""Dyadic pieces of the truncated operator and checks on their building blocks.

T_j(x, y) = 2^{-j1-j2} chi_j(x-y) e^{i gamma Psi} sin(theta) is split as
H_j + U_j + W_j + sum_r V_j^r using the cutoffs a_m, b_m, h_l, h_{l,r}, all
evaluated at the sums X = x + y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .cutoffs import chi_1, chi_2, chi_j, chi_tilde_j, dyadic_candidates, eta, eta0, smooth_step
from .oscillator import KernelSpec
from .phase import PolySpec, Psi, Xi, beta, beta_d1, beta_d2, phase_derivatives, theta

__all__ = [
    "eta0", "eta", "smooth_step", "chi_1", "chi_2", "chi_j", "chi_tilde_j", "dyadic_candidates",
    "PieceSpec", "T_j", "T_R_sum", "contributing_indices",
    "a_m", "b_m", "h_l", "h_lr", "r_star",
    "H_j", "U_j", "V_jr", "W_j", "U_jL", "W_jML", "pieces", "reconstruction_defect",
    "lemma61_check", "alpha_m", "lemma62_check", "lemma64_measure", "schur_scaling_probe",
]


@dataclass(frozen=True)
class PieceSpec:
    kernel: KernelSpec
    j1: int
    j2: int
    r: Optional[int] = None
    M: Optional[int] = None
    L: Optional[int] = None

    def __post_init__(self):
        if self.r is not None and self.r <= 0:
            raise ValueError("r must be positive for V-pieces")


def _eta0_ratio(scale, num, den):
    """eta0(scale * num / den) with den = 0 read as an infinite argument (value 0), or 1 if num = 0 too."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    zero = den == 0.0
    safe = np.where(zero, 1.0, den)
    val = eta0(scale * num / safe)
    return np.where(zero, np.where(num == 0.0, 1.0, 0.0), val)


def T_j(x1, x2, y1, y2, spec: KernelSpec, j1: int, j2: int):
    if j1 <= 10:
        raise ValueError("T_j is used with j1 > 10")
    d, w = x1 - y1, x2 - y2
    ph = np.exp(1j * spec.gamma * Psi(x1, x2, y1, y2, spec.p))
    return 2.0 ** (-j1 - j2) * chi_j(d, w, j1, j2) * ph * np.sin(theta(x1, x2, y1, y2, spec.p))


def contributing_indices(x1, x2, y1, y2, spec: KernelSpec):
    """Admissible (j1, j2) with chi_j(x - y) != 0 at a single point."""
    jmax = math.log2(spec.R)
    d, w = float(x1 - y1), float(x2 - y2)
    out = []
    if d == 0.0 or w == 0.0:
        return out
    for j1 in dyadic_candidates(d).tolist():
        if not 10 < j1 <= jmax:
            continue
        for j2 in dyadic_candidates(w).tolist():
            if chi_j(d, w, j1, j2) != 0.0:
                out.append((j1, j2))
    return out


def T_R_sum(x1, x2, y1, y2, spec: KernelSpec):
    """sum of T_j over 10 < j1 <= log2 R and all j2, restricted to the dyadic supports at each point."""
    x1, x2, y1, y2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x1, x2, y1, y2)))
    jmax = math.log2(spec.R)
    J1 = dyadic_candidates(x1 - y1)
    J2 = dyadic_candidates(x2 - y2)
    total = np.zeros(x1.shape, dtype=complex)
    for a in range(J1.shape[-1]):
        j1 = J1[..., a]
        ok1 = (j1 > 10) & (j1 <= jmax)
        for b in range(J2.shape[-1]):
            j2 = J2[..., b]
            # per-point dyadic indices, so form the pieces by hand
            c1 = eta(np.ldexp(x1 - y1, -j1)) / beta(x1 - y1)
            w = x2 - y2
            e2 = eta(np.ldexp(w, -j2))
            c2 = np.where(e2 != 0, e2 / np.where(e2 != 0, w, 1.0), 0.0)
            val = c1 * c2 * np.exp(1j * spec.gamma * Psi(x1, x2, y1, y2, spec.p)) * np.sin(theta(x1, x2, y1, y2, spec.p))
            total += np.where(ok1, val, 0.0)
    return total


def a_m(sigma, p: PolySpec, m: int):
    """prod_{nu=2}^{deg p - 1} eta0(2^{m+10} p^{(nu+1)}/p^{(nu)}); 1 when deg p <= 2."""
    sigma = np.asarray(sigma, dtype=float)
    out = np.ones(sigma.shape)
    for nu in range(2, p.degree):
        out = out * _eta0_ratio(2.0 ** (m + 10), p.deriv(nu + 1)(sigma), p.deriv(nu)(sigma))
    return out


def b_m(X1, X2, p: PolySpec, m: int):
    return _eta0_ratio(2.0 ** (m + 10), p.deriv(2)(X1), p.deriv(1)(X1) + np.asarray(X2, dtype=float))


def h_l(X1, X2, p: PolySpec, l: int):
    return eta0(2.0 ** (-l - 10) * (np.asarray(X2, dtype=float) + p.deriv(1)(X1)))


def h_lr(X1, X2, p: PolySpec, l: int, r: int):
    return eta(2.0 ** (-l + r - 10) * (np.asarray(X2, dtype=float) + p.deriv(1)(X1)))


def r_star(X1, X2, p: PolySpec, l: int, r_cap: int = 4096) -> int:
    """Smallest r with 2^{-l+r-10} |X2 + p'(X1)| > 3/2 at every point (later h_{l,r} vanish)."""
    A = np.abs(np.asarray(X2, dtype=float) + p.deriv(1)(X1))
    A = A[A > 0]
    if A.size == 0:
        return 1
    r = int(math.floor(math.log2(1.5 / A.min()) + l + 10)) + 1
    while np.any(2.0 ** (-l + r - 10) * A <= 1.5):
        r += 1
    return max(1, min(r, r_cap))


def _factors(x1, x2, y1, y2, p, j1):
    X1, X2 = x1 + y1, x2 + y2
    return a_m(X1, p, j1), b_m(X1, X2, p, j1), X1, X2


def H_j(x1, x2, y1, y2, s: PieceSpec):
    a, _, _, _ = _factors(x1, x2, y1, y2, s.kernel.p, s.j1)
    return T_j(x1, x2, y1, y2, s.kernel, s.j1, s.j2) * (1 - a)


def U_j(x1, x2, y1, y2, s: PieceSpec):
    a, b, _, _ = _factors(x1, x2, y1, y2, s.kernel.p, s.j1)
    return T_j(x1, x2, y1, y2, s.kernel, s.j1, s.j2) * a * (1 - b)


def V_jr(x1, x2, y1, y2, s: PieceSpec):
    if s.r is None:
        raise ValueError("V-piece needs r")
    a, b, X1, X2 = _factors(x1, x2, y1, y2, s.kernel.p, s.j1)
    return T_j(x1, x2, y1, y2, s.kernel, s.j1, s.j2) * a * b * h_lr(X1, X2, s.kernel.p, s.j2, s.r)


def W_j(x1, x2, y1, y2, s: PieceSpec):
    a, b, X1, X2 = _factors(x1, x2, y1, y2, s.kernel.p, s.j1)
    return T_j(x1, x2, y1, y2, s.kernel, s.j1, s.j2) * a * b * (1 - h_l(X1, X2, s.kernel.p, s.j2))


def _L_factor(x1, p, L):
    return eta(2.0 ** (-L) * p.deriv(2)(2 * np.asarray(x1, dtype=float)))


def U_jL(x1, x2, y1, y2, s: PieceSpec):
    if s.L is None:
        raise ValueError("U^L piece needs L")
    return U_j(x1, x2, y1, y2, s) * _L_factor(x1, s.kernel.p, s.L)


def W_jML(x1, x2, y1, y2, s: PieceSpec):
    if s.M is None or s.L is None:
        raise ValueError("W^{M,L} piece needs M and L")
    p = s.kernel.p
    m_fac = eta(2.0 ** (-s.M) * (2 * np.asarray(x2, dtype=float) + p.deriv(1)(2 * np.asarray(x1, dtype=float))))
    return W_j(x1, x2, y1, y2, s) * m_fac * _L_factor(x1, p, s.L)


def pieces(x1, x2, y1, y2, spec: KernelSpec, j1: int, j2: int) -> Dict[str, np.ndarray]:
    """T, H, U, W and the summed V over r = 1..r* at the given points."""
    ps = PieceSpec(spec, j1, j2)
    X1, X2 = x1 + y1, x2 + y2
    rs = r_star(X1, X2, spec.p, j2)
    V = sum(V_jr(x1, x2, y1, y2, PieceSpec(spec, j1, j2, r=r)) for r in range(1, rs + 1))
    return {"T": T_j(x1, x2, y1, y2, spec, j1, j2), "H": H_j(x1, x2, y1, y2, ps),
            "U": U_j(x1, x2, y1, y2, ps), "W": W_j(x1, x2, y1, y2, ps), "V": V, "r_star": rs}


def reconstruction_defect(x1, x2, y1, y2, spec: KernelSpec, j1: int, j2: int) -> float:
    """max |H + U + W + sum_r V^r - T| at the given points."""
    P = pieces(x1, x2, y1, y2, spec, j1, j2)
    return float(np.max(np.abs(P["H"] + P["U"] + P["W"] + P["V"] - P["T"])))


# Finite-difference oracle for the closed-form derivatives.

_FD_BASE = 1e-4
# (function, coordinate indices); coordinates are (x1, x2, y1, y2)
_FD_TARGETS = {
    "Psi_x1": ("Psi", (0,)), "Psi_x2": ("Psi", (1,)),
    "theta_x1": ("theta", (0,)), "theta_x2": ("theta", (1,)),
    "Psi_x1y1": ("Psi", (0, 2)), "theta_x1y1": ("theta", (0, 2)),
    "Psi_x1y2": ("Psi", (0, 3)), "Psi_x2y1": ("Psi", (1, 2)),
    "theta_x1y2": ("theta", (0, 3)), "theta_x2y1": ("theta", (1, 2)),
    "Psi_x2x2y1": ("Psi", (1, 1, 2)), "theta_x2x2y1": ("theta", (1, 1, 2)),
    "Psi_x2y2": ("Psi", (1, 3)), "theta_x2y2": ("theta", (1, 3)),
}


def _central(f, pt, idx, steps):
    """Nested central differences of f at pt along the coordinates in idx."""
    if not idx:
        return f(*pt)
    k = idx[0]
    e = np.zeros((4,) + np.shape(pt[0]))
    e[k] = steps[k]
    return (_central(f, pt + e, idx[1:], steps) - _central(f, pt - e, idx[1:], steps)) / (2 * steps[k])


def fd_derivative(f, pt: np.ndarray, idx: Sequence[int]):
    """Central differences with step 10^{order-1} 1e-4 (1+|coord|) and one Richardson level."""
    pt = np.asarray(pt, dtype=float)
    h = _FD_BASE * 10.0 ** (len(idx) - 1) * (1 + np.abs(pt))
    D1 = _central(f, pt, tuple(idx), h)
    D2 = _central(f, pt, tuple(idx), h / 2)
    return (4 * D2 - D1) / 3


@dataclass(frozen=True)
class Lemma61Report:
    worst_relative: float
    worst_name: str
    errors: Dict[str, float]
    zero_identities: float
    triple_identity: float


def lemma61_check(p: PolySpec, gamma: float = 1.0, samples: Optional[np.ndarray] = None, n_samples: int = 1000,
                  seed: int = 0, min_xi: float = 0.5) -> Lemma61Report:
    """Compare the closed forms with finite differences of Psi and theta.

    The error is |closed - fd| / max(1, |closed|).  Samples with |Xi| < min_xi
    are re-drawn so the stencils stay on one side of the kink of |Xi|.
    ``zero_identities`` is the largest fd value of Psi_x2y2, theta_x2y2;
    ``triple_identity`` the largest |fd(Psi_x2x2y1) + 2|.
    """
    rng = np.random.default_rng(seed)
    if samples is None:
        pts = []
        while sum(len(a) for a in pts) < n_samples:
            c = rng.uniform(-2, 2, size=(4, 4 * n_samples))
            keep = np.abs(Xi(*c, p)) >= min_xi
            pts.append(c[:, keep].T)
        samples = np.concatenate(pts)[:n_samples].T
    pt = np.asarray(samples, dtype=float)
    funcs = {"Psi": lambda a, b, c, d: Psi(a, b, c, d, p), "theta": lambda a, b, c, d: theta(a, b, c, d, p)}
    closed = phase_derivatives(*pt, p)
    errs = {}
    for name, (fn, idx) in _FD_TARGETS.items():
        fd = fd_derivative(funcs[fn], pt, idx)
        errs[name] = float(np.max(np.abs(closed[name] - fd) / np.maximum(1.0, np.abs(closed[name]))))
    s = pt[0] - pt[2]
    bfd = fd_derivative(lambda a, b, c, d: beta(a), np.stack([s, s, s, s]), (0,))
    errs["beta_d1"] = float(np.max(np.abs(beta_d1(s) - bfd)))
    b2fd = fd_derivative(lambda a, b, c, d: beta(a), np.stack([s, s, s, s]), (0, 0))
    errs["beta_d2"] = float(np.max(np.abs(beta_d2(s) - b2fd)))
    zero = max(float(np.max(np.abs(fd_derivative(funcs[f], pt, (1, 3))))) for f in ("Psi", "theta"))
    triple = float(np.max(np.abs(fd_derivative(funcs["Psi"], pt, (1, 1, 2)) + 2.0)))
    worst = max(errs, key=errs.get)
    return Lemma61Report(errs[worst], worst, errs, zero, triple)


def alpha_m(sigma, P: PolySpec, m: int, ell: int = 1):
    """prod_{nu=ell}^{deg P} eta0(2^{m+10} P^{(nu)}/P^{(nu-1)})."""
    if not 1 <= ell <= P.degree:
        raise ValueError("need 1 <= ell <= deg P")
    sigma = np.asarray(sigma, dtype=float)
    out = np.ones(sigma.shape)
    for nu in range(ell, P.degree + 1):
        out = out * _eta0_ratio(2.0 ** (m + 10), P.deriv(nu)(sigma), P.deriv(nu - 1)(sigma))
    return out


@dataclass(frozen=True)
class Lemma62Report:
    holds: bool
    violations: int
    worst_ratio: float
    derivative_constant: float


def lemma62_check(P: PolySpec, m: int, sigma: float, n_samples: int = 1000, ell: int = 1, seed: int = 0,
                  derivative_bound: float = 64.0) -> Lemma62Report:
    """Taylor-stability of P^{(nu)} on |tau - sigma| <= 2^{m+7} for sigma in supp alpha_m.

    ``worst_ratio`` is max |P^{(nu)}(tau) - P^{(nu)}(sigma)| / |P^{(nu)}(sigma)| (bound 1/5).
    ``derivative_constant`` is 2^m max |alpha_m'| over a window, by central differences.
    """
    if alpha_m(sigma, P, m, ell) == 0:
        raise ValueError("sigma is not in the support of alpha_m")
    rng = np.random.default_rng(seed)
    tau = sigma + rng.uniform(-1, 1, n_samples) * 2.0 ** (m + 7)
    tau = np.concatenate([[sigma], tau])
    worst, bad = 0.0, 0
    for nu in range(ell, P.degree + 1):
        ref = abs(float(P.deriv(nu)(sigma)))
        diff = np.abs(P.deriv(nu)(tau) - P.deriv(nu)(sigma))
        if ref == 0:
            bad += int(np.sum(diff > 0))
            continue
        worst = max(worst, float(diff.max() / ref))
        bad += int(np.sum(diff > ref / 5))
    # derivative of alpha_m over the scale of sigma, on both sides
    s = np.linspace(-4 * abs(sigma), 4 * abs(sigma), 40001)
    h = 1e-3 * 2.0 ** m
    da = (alpha_m(s + h, P, m, ell) - alpha_m(s - h, P, m, ell)) / (2 * h)
    C = float(np.max(np.abs(da))) * 2.0 ** m
    return Lemma62Report(bad == 0 and C <= derivative_bound, bad, worst, C)


@dataclass(frozen=True)
class Lemma64Report:
    integral: float
    stderr: float
    support_measure: float
    bound: float
    holds: bool


def _root_bound(P: PolySpec) -> float:
    c = np.asarray(P.coeffs)
    if P.degree == 0:
        return 0.0
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1])))


def lemma64_measure(P: PolySpec, rho: float, A: float, c1: float = 1.0, c2: float = 1.0, m: Optional[int] = None,
                    samples: int = 1_000_000, seed: int = 0, slack: float = 8.0) -> Lemma64Report:
    """Monte Carlo estimate of iint_{|s-t|<=rho} |1 - eta0(A rho P'/P (c1 s + c2 t))| ds dt.

    Sampled in the coordinates (s - t, c1 s + c2 t), Jacobian 1/|c1 + c2|, over
    [-rho, rho] x [-S, S] with S = 10 (1 + Cauchy root bound) + 4 m A rho.
    ``holds`` compares estimate + 3 stderr with slack A m^2 rho^2 / |c1 + c2|.
    """
    if P.is_zero:
        raise ValueError("P must not vanish identically")
    if not (rho > 0 and A > 0):
        raise ValueError("rho and A must be positive")
    if c1 + c2 == 0:
        raise ValueError("c1 + c2 must be non-zero")
    m = max(P.degree, 1) if m is None else m
    S = 10 * (1 + _root_bound(P)) + 4 * m * A * rho
    rng = np.random.default_rng(seed)
    tau = rng.uniform(-S, S, samples)
    vol = 2 * rho * 2 * S / abs(c1 + c2)
    # the integrand depends on s - t only through the constraint, which the sampling box enforces
    vals = np.abs(1.0 - _eta0_ratio(A * rho, P.deriv(1)(tau), P(tau)))
    est = vol * float(vals.mean())
    err = vol * float(vals.std(ddof=1)) / math.sqrt(samples)
    supp = vol * float(np.mean(vals > 0))
    bound = slack * A * m * m * rho * rho / abs(c1 + c2)
    return Lemma64Report(est, err, supp, bound, est + 3 * err <= bound)


@dataclass(frozen=True)
class SchurProbe:
    row: float
    col: float
    scaling: float

    @property
    def geometric_mean(self) -> float:
        return math.sqrt(self.row * self.col)

    @property
    def ratio(self) -> float:
        return self.geometric_mean / self.scaling if self.scaling > 0 else math.inf


_PIECES = {"H": H_j, "U": U_j, "V": V_jr, "W": W_j, "UL": U_jL, "WML": W_jML}


def _offsets(j, per):
    """Midpoints on +-2^j [1/2, 3/2] and their weight."""
    lo, hi = 2.0 ** (j - 1), 3 * 2.0 ** (j - 1)
    step = (hi - lo) / per
    pos = lo + step * (np.arange(per) + 0.5)
    return np.concatenate([-pos[::-1], pos]), step


def schur_scaling_probe(kind: str, s: PieceSpec, base_points: np.ndarray, per: int = 48) -> SchurProbe:
    """Sup over base points of int |piece(x, .)| and int |piece(., y)| on the dyadic support.

    ``scaling`` is the small-parameter size of the piece: 2^{L+2j1+j2} for U^L,
    2^{2j2+j1-r} for V^r and 2^{M+j1+j2} for W^{M,L}.
    """
    if kind not in _PIECES:
        raise ValueError(f"unknown piece {kind!r}")
    f = _PIECES[kind]
    d1, w1 = _offsets(s.j1, per)
    d2, w2 = _offsets(s.j2, per)
    D1, D2 = np.meshgrid(d1, d2, indexing="ij")
    wt = w1 * w2
    row = col = 0.0
    for b1, b2 in np.asarray(base_points, dtype=float).reshape(-1, 2):
        row = max(row, float(np.sum(np.abs(f(b1, b2, b1 - D1, b2 - D2, s)))) * wt)
        col = max(col, float(np.sum(np.abs(f(b1 + D1, b2 + D2, b1, b2, s)))) * wt)
    if kind == "UL":
        scale = 2.0 ** (s.L + 2 * s.j1 + s.j2)
    elif kind == "V":
        scale = 2.0 ** (2 * s.j2 + s.j1 - s.r)
    elif kind == "WML":
        scale = 2.0 ** (s.M + s.j1 + s.j2)
    else:
        scale = math.nan
    return SchurProbe(row, col, scale)
