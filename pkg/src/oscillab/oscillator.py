"""The singular oscillatory operator O^R and tools to measure its norm.

Kernel:  e^{i gamma Psi} sin(theta) / (beta(x1-y1)(x2-y2)) on |x1-y1| <= R,
written as e^{i gamma Psi} |Xi| sinc(theta/pi) so the diagonal x2 = y2 needs no
special case.  Operators are discretised by the midpoint (Nystrom) rule on a
uniform grid and their norms estimated by power iteration on K*K.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .cutoffs import chi_1
from .phase import PolySpec, Psi, Xi, beta, phase_gradient_norm, theta

__all__ = [
    "PolySpec", "KernelSpec", "DiscretizedOperator", "NormEstimate", "SweepRow",
    "PhaseResolutionError", "GridTooLargeError",
    "beta", "Psi", "theta", "Xi", "oR_kernel", "required_step", "discretize", "op_norm",
    "norm_sweep", "write_sweep_csv", "commutative_norm", "affine_h", "b_kernel", "b_operator_norm",
]

PHASE_BUDGET = math.pi / 4
DENSE_LIMIT = 8192


class PhaseResolutionError(ValueError):
    """The grid step does not resolve the kernel's oscillation."""

    def __init__(self, h: float, required: float):
        super().__init__(f"phase-resolution rule violated: step {h:.6g} > required {required:.6g}")
        self.h = h
        self.required = required


class GridTooLargeError(ValueError):
    """The grid needed by the phase rule is beyond the configured size."""

    def __init__(self, points: int, limit: int, required: float):
        super().__init__(
            f"phase-resolution rule needs step {required:.6g} and {points} grid points (limit {limit})"
        )
        self.points = points
        self.limit = limit
        self.required = required


@dataclass(frozen=True)
class KernelSpec:
    n: int
    gamma: float
    p: PolySpec = PolySpec()
    R: float = 1.0
    Gamma: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        G = abs(self.gamma) if self.Gamma is None else self.Gamma
        object.__setattr__(self, "Gamma", float(G))
        if not min(1.0, self.n / 2.0) <= abs(self.gamma) <= self.Gamma:
            raise ValueError(f"need min(1, n/2) <= |gamma| <= Gamma, got gamma={self.gamma}, n={self.n}")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.p.degree > self.n:
            raise ValueError(f"polynomial degree {self.p.degree} exceeds n={self.n}")

    def with_R(self, R: float) -> "KernelSpec":
        return replace(self, R=float(R))


def oR_kernel(spec: KernelSpec) -> Callable:
    """Kernel of O^R as a function of (x1, x2, y1, y2)."""
    g, p, R = spec.gamma, spec.p, spec.R

    def K(x1, x2, y1, y2):
        ph = Psi(x1, x2, y1, y2, p)
        th = theta(x1, x2, y1, y2, p)
        val = np.exp(1j * g * ph) * np.abs(Xi(x1, x2, y1, y2, p)) * np.sinc(th / np.pi)
        return np.where(np.abs(x1 - y1) <= R, val, 0.0)

    return K


def _axis(half: float, h: float):
    """Cell centres on [-half, half] with step <= h."""
    m = max(1, int(math.ceil(2 * half / h - 1e-9)))
    step = 2 * half / m
    return -half + step * (np.arange(m) + 0.5), step


def required_step(spec: KernelSpec, box: Sequence[float], samples: int = 17) -> float:
    """Largest h with h * max|grad(gamma Psi +- theta)| <= pi/4 over pairs in the box.

    The gradient is taken from the closed forms and maximised over a lattice of
    ``samples`` points per axis (corners included), pairs restricted to
    |x1 - y1| <= R.
    """
    X1, X2 = box
    a1 = np.linspace(-X1, X1, samples)
    a2 = np.linspace(-X2, X2, samples)
    P1, P2 = np.meshgrid(a1, a2, indexing="ij")
    P1, P2 = P1.ravel(), P2.ravel()
    x1, y1 = P1[:, None], P1[None, :]
    x2, y2 = P2[:, None], P2[None, :]
    with np.errstate(invalid="ignore"):
        G = phase_gradient_norm(x1, x2, y1, y2, spec.p, spec.gamma)
    G = np.where(np.abs(x1 - y1) <= spec.R, G, 0.0)
    gmax = float(np.max(G))
    return math.inf if gmax == 0 else PHASE_BUDGET / gmax


@dataclass
class DiscretizedOperator:
    """Midpoint-rule matrix of a kernel on a tensor grid, applied matrix-free.

    ``kernel(x1, x2, y1, y2)`` is evaluated in row blocks; the dense matrix is
    cached when the grid has at most ``DENSE_LIMIT`` points.
    """

    x1: np.ndarray
    x2: np.ndarray
    kernel: Callable
    weight: float
    h: float = 0.0
    band: Optional[float] = None
    block: int = 512
    _dense: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        P1, P2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        self.p1, self.p2 = P1.ravel(), P2.ravel()

    @property
    def size(self) -> int:
        return self.p1.size

    def _cols(self, lo: int, hi: int) -> slice:
        # p1 is non-decreasing, so the band |x1 - y1| <= band is a column slice
        if self.band is None:
            return slice(0, self.size)
        a = np.searchsorted(self.p1, self.p1[lo] - self.band * (1 + 1e-12), side="left")
        b = np.searchsorted(self.p1, self.p1[hi - 1] + self.band * (1 + 1e-12), side="right")
        return slice(int(a), int(b))

    def _block(self, lo: int, hi: int):
        hi = min(hi, self.size)
        c = self._cols(lo, hi)
        M = self.kernel(self.p1[lo:hi, None], self.p2[lo:hi, None], self.p1[None, c], self.p2[None, c])
        return M * self.weight, c

    def rows(self, lo: int, hi: int) -> np.ndarray:
        hi = min(hi, self.size)
        out = np.zeros((hi - lo, self.size), dtype=complex)
        M, c = self._block(lo, hi)
        out[:, c] = M
        return out

    def dense(self) -> np.ndarray:
        if self._dense is None:
            M = np.zeros((self.size, self.size), dtype=complex)
            for lo in range(0, self.size, self.block):
                B, c = self._block(lo, lo + self.block)
                M[lo:lo + B.shape[0], c] = B
            self._dense = M
        return self._dense

    def matvec(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=complex).reshape(-1)
        if self.size <= DENSE_LIMIT:
            return self.dense() @ g
        out = np.empty(self.size, dtype=complex)
        for lo in range(0, self.size, self.block):
            B, c = self._block(lo, lo + self.block)
            out[lo:lo + B.shape[0]] = B @ g[c]
        return out

    def rmatvec(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=complex).reshape(-1)
        if self.size <= DENSE_LIMIT:
            return self.dense().conj().T @ g
        out = np.zeros(self.size, dtype=complex)
        for lo in range(0, self.size, self.block):
            B, c = self._block(lo, lo + self.block)
            out[c] += B.conj().T @ g[lo:lo + B.shape[0]]
        return out

    def grid_values(self, f: Callable) -> np.ndarray:
        return np.asarray(f(self.p1, self.p2), dtype=complex)

    def l2_norm(self, g) -> float:
        return float(np.sqrt(self.weight * np.sum(np.abs(g) ** 2)))


def discretize(spec: KernelSpec, box: Sequence[float], h: Optional[float] = None, *,
               check_phase: bool = True, max_points: Optional[int] = None) -> DiscretizedOperator:
    """Nystrom matrix of O^R on [-X1, X1] x [-X2, X2] with step <= h.

    With ``h=None`` the step is taken from the phase rule.  A given ``h`` that
    violates the rule raises PhaseResolutionError carrying the required step.
    """
    X1, X2 = float(box[0]), float(box[1])
    req = required_step(spec, (X1, X2))
    if h is None:
        if not math.isfinite(req):
            raise ValueError("kernel does not oscillate on this box; pass an explicit step")
        h = req
    elif check_phase and h > req * (1 + 1e-12):
        raise PhaseResolutionError(h, req)
    n1 = max(1, int(math.ceil(2 * X1 / h - 1e-9)))
    n2 = max(1, int(math.ceil(2 * X2 / h - 1e-9)))
    if max_points is not None and n1 * n2 > max_points:
        raise GridTooLargeError(n1 * n2, max_points, min(h, req))
    a1, h1 = _axis(X1, h)
    a2, h2 = _axis(X2, h)
    return DiscretizedOperator(a1, a2, oR_kernel(spec), h1 * h2, max(h1, h2), band=spec.R)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    residual: float
    converged: bool = True
    second_value: float = math.nan
    flagged: bool = False


def _as_ops(op):
    if isinstance(op, np.ndarray):
        return (lambda v: op @ v), (lambda v: op.conj().T @ v), op.shape[1]
    return op.matvec, op.rmatvec, op.size


def _power(mv, rmv, size, rng, tol, maxiter):
    v = rng.normal(size=size) + 1j * rng.normal(size=size)
    v /= np.linalg.norm(v)
    lam_old = 0.0
    for it in range(1, maxiter + 1):
        z = rmv(mv(v))
        lam = float(np.real(np.vdot(v, z)))
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0, it, 0.0, True
        v = z / nz
        rel = abs(lam - lam_old) / max(abs(lam), 1e-300)
        if it > 1 and rel <= tol:
            return lam, it, rel, True
        lam_old = lam
    return lam, maxiter, rel, False


def op_norm(op, tol: float = 1e-10, maxiter: int = 500, seed: int = 0) -> NormEstimate:
    """Largest singular value by power iteration on K*K from two seeded complex starts.

    ``residual`` is the relative change of the Rayleigh quotient at the last
    step.  The estimate is flagged when the starts disagree by more than 5 tol.
    """
    mv, rmv, size = _as_ops(op)
    lam1, it1, res1, ok1 = _power(mv, rmv, size, np.random.default_rng(seed), tol, maxiter)
    lam2, it2, res2, ok2 = _power(mv, rmv, size, np.random.default_rng(seed + 1), tol, maxiter)
    s1, s2 = math.sqrt(max(lam1, 0.0)), math.sqrt(max(lam2, 0.0))
    best = max(s1, s2)
    disagree = abs(s1 - s2) > 5 * tol * max(best, 1e-300)
    return NormEstimate(best, max(it1, it2), max(res1, res2), ok1 and ok2, s2, disagree)


@dataclass(frozen=True)
class SweepRow:
    R: float
    box: float
    step: float
    norm: float
    iterations: int
    residual: float


def norm_sweep(template: KernelSpec, R_list: Iterable[float], *, pad: float = 8.0, x2_half: float = 8.0,
               h: Optional[float] = None, tol: float = 1e-8, max_points: int = DENSE_LIMIT,
               seed: int = 0) -> List[SweepRow]:
    """One op_norm per R on x1 in [-(R+pad), R+pad], x2 in [-x2_half, x2_half]."""
    Rs = [float(r) for r in R_list]
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise ValueError("R list must be increasing")
    rows = []
    for R in Rs:
        spec = template.with_R(R)
        op = discretize(spec, (R + pad, x2_half), h, max_points=max_points)
        est = op_norm(op, tol=tol, seed=seed)
        rows.append(SweepRow(R, R + pad, op.h, est.value, est.iterations, est.residual))
    return rows


SWEEP_HEADER = ("R", "box", "step", "norm", "iterations", "residual")


def format_sig(x: float) -> str:
    return f"{x:.9g}"


def sweep_csv_text(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([format_sig(r.R), format_sig(r.box), format_sig(r.step), format_sig(r.norm),
                    str(r.iterations), format_sig(r.residual)])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sweep_csv(rows: Sequence[SweepRow], path: str) -> None:
    write_atomic(path, sweep_csv_text(rows))


def commutative_norm(R: float, n_freq: int = 401, lam_max: Optional[float] = None,
                     panel: float = 0.25, order: int = 16) -> tuple[float, float]:
    """(exact, numeric) sup of the symbol of convolution with (pi^2/2) chi_[-R,R]/beta.

    exact = 2 pi^2 asinh(R/2); numeric maximises |(pi^2/2) int_{-R}^{R} e^{-i lam c}/beta(c) dc|
    over a frequency grid containing 0, by Gauss-Legendre panels.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    exact = 2 * math.pi ** 2 * math.asinh(R / 2)
    m = max(1, int(math.ceil(R / panel)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, R, m + 1)
    half = 0.5 * np.diff(edges)
    c = ((edges[:-1] + edges[1:]) / 2)[:, None] + half[:, None] * x
    wc = (half[:, None] * w).ravel()
    c = c.ravel()
    lam_max = 20.0 if lam_max is None else lam_max
    lam = np.linspace(0.0, lam_max, n_freq)
    # the integrand is even in c
    sym = math.pi ** 2 * (np.cos(np.outer(lam, c)) / beta(c)) @ wc
    return exact, float(np.max(np.abs(sym)))


def _affine_integrand(sig, A, D, j1):
    return np.exp(-1j * sig * A) * np.sin(beta(sig) * D) * chi_1(sig, j1)


def affine_h(xi1: float, x2: float, y2: float, j1: int, gamma: float, *, method: str = "panels",
             order: int = 16) -> complex:
    """2^{-j1} int e^{i sig gamma (x2^2+y2^2) - i sig xi1} sin(beta(sig)|x2^2-y2^2|) chi_{1,j1}(sig) d sig.

    ``panels``: Gauss-Legendre panels sized so the phases sig A +- beta(sig) D
    turn by at most pi/2 per panel.  ``dense``: composite trapezoid at ten
    times the Nyquist rate of the same phases.
    """
    if j1 <= 0:
        raise ValueError("j1 must be positive")
    A = xi1 - gamma * (x2 * x2 + y2 * y2)
    D = abs(x2 * x2 - y2 * y2)
    if D == 0.0:
        return 0j
    lo, hi = 2.0 ** (j1 - 1), 3.0 * 2.0 ** (j1 - 1)
    # |d/d sig (sig A +- beta D)| <= |A| + D/2 since |beta'| < 1/2
    freq = abs(A) + 0.5 * D + 2.0 ** -j1
    total = 0j
    if method == "panels":
        width = min((math.pi / 2) / freq, (hi - lo) / 64)
        m = int(math.ceil((hi - lo) / width))
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(lo, hi, m + 1)
        half = 0.5 * np.diff(edges)
        s = (((edges[:-1] + edges[1:]) / 2)[:, None] + half[:, None] * x).ravel()
        ws = (half[:, None] * w).ravel()
        for sgn in (1.0, -1.0):
            total += np.sum(ws * _affine_integrand(sgn * s, A, D, j1))
    elif method == "dense":
        step = min(math.pi / freq / 10, (hi - lo) / 2048)
        m = int(math.ceil((hi - lo) / step))
        s = np.linspace(lo, hi, m + 1)
        for sgn in (1.0, -1.0):
            total += np.trapezoid(_affine_integrand(sgn * s, A, D, j1), s)
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(total * 2.0 ** -j1)


def b_kernel(x1: float, y1: float, p: PolySpec, gamma: float) -> Callable:
    """e^{i gamma Psi} sin(theta)/(x2 - y2) at frozen (x1, y1); diagonal value beta |Xi|."""
    bd = float(beta(x1 - y1))

    def K(x2, y2):
        X = Xi(x1, x2, y1, y2, p)
        th = theta(x1, x2, y1, y2, p)
        return np.exp(1j * gamma * Psi(x1, x2, y1, y2, p)) * bd * np.abs(X) * np.sinc(th / np.pi)

    return K


def b_required_step(x1: float, y1: float, p: PolySpec, gamma: float, half: float, samples: int = 65) -> float:
    t = np.linspace(-half, half, samples)
    x2, y2 = t[:, None], t[None, :]
    with np.errstate(invalid="ignore"):
        G = phase_gradient_norm(np.full_like(x2, x1), x2, np.full_like(y2, y1), y2, p, gamma)
    return PHASE_BUDGET / float(np.max(G))


def b_matrix(x1: float, y1: float, p: PolySpec, gamma: float, grid: Sequence[float], check_phase: bool = True):
    half, h = float(grid[0]), float(grid[1])
    if check_phase:
        req = b_required_step(x1, y1, p, gamma, half)
        if h > req * (1 + 1e-12):
            raise PhaseResolutionError(h, req)
    t, step = _axis(half, h)
    return b_kernel(x1, y1, p, gamma)(t[:, None], t[None, :]) * step, t


def b_operator_norm(x1: float, y1: float, p: PolySpec, gamma: float, grid: Sequence[float],
                    tol: float = 1e-10, check_phase: bool = True) -> NormEstimate:
    """Norm of the frozen-(x1, y1) operator on x2 in [-grid[0], grid[0]] with step <= grid[1]."""
    M, _ = b_matrix(x1, y1, p, gamma, grid, check_phase)
    return op_norm(M, tol=tol)
