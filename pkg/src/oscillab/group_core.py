"""Arithmetic in SL(2,R), the Heisenberg group H^n and the semidirect product G_n.

SL(2,R) acts on R^{2n} through the irreducible representation of dimension 2n,
realised on homogeneous polynomials of degree 2n-1.  The resulting matrices
``Z(A)`` preserve the alternating form ``B``, so ``(A, u, t)`` with the twisted
product

    (A, u, t)(A', u', t') = (AA', u + Z(A)u', t + t' + u^T B Z(A) u')

is a group.  Vectors are indexed 1..2n in docstrings and 0..2n-1 in code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

MAX_N = 16
DET_TOL = 1e-12
ELEMENT_ATOL = 1e-9


@lru_cache(maxsize=None)
def _pascal(rows: int) -> np.ndarray:
    """Binomial table C[k, l] in double precision (zero outside 0 <= l <= k)."""
    table = np.zeros((rows + 1, rows + 1))
    table[0, 0] = 1.0
    for k in range(1, rows + 1):
        table[k, 0] = 1.0
        table[k, 1:k + 1] = table[k - 1, 0:k] + table[k - 1, 1:k + 1]
    table.setflags(write=False)
    return table


def binom(k: int, l: int) -> float:
    if l < 0 or k < 0 or l > k:
        return 0.0
    return float(_pascal(max(k, 2 * MAX_N))[k, l])


def _check_n(n: int) -> int:
    n = int(n)
    if n < 1 or n > MAX_N:
        raise ValueError(f"dimension parameter n must lie in 1..{MAX_N}, got {n}")
    return n


@dataclass(frozen=True)
class SL2Element:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not math.isfinite(det) or abs(det - 1.0) > DET_TOL * max(1.0, self.norm() ** 2):
            raise ValueError(f"determinant {det!r} differs from 1")

    @classmethod
    def from_matrix(cls, m) -> "SL2Element":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def norm(self) -> float:
        return math.sqrt(self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2)

    def __matmul__(self, other: "SL2Element") -> "SL2Element":
        return SL2Element.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "SL2Element":
        return SL2Element(self.d, -self.b, -self.c, self.a)

    def transpose(self) -> "SL2Element":
        return SL2Element(self.a, self.c, self.b, self.d)


IDENTITY = SL2Element(1.0, 0.0, 0.0, 1.0)
J = SL2Element(0.0, 1.0, -1.0, 0.0)


def as_matrix(A) -> np.ndarray:
    if isinstance(A, SL2Element):
        return A.matrix
    return np.asarray(A, dtype=float)


def rotation(angle: float) -> SL2Element:
    c, s = math.cos(angle), math.sin(angle)
    return SL2Element(c, s, -s, c)


def shear(b: float) -> SL2Element:
    """The unipotent element n_b."""
    return SL2Element(1.0, float(b), 0.0, 1.0)


def random_sl2(rng: np.random.Generator, log_scale: float = 1.0, shear_max: float = 2.0) -> SL2Element:
    """Sample K·A·N with bounded Iwasawa parameters."""
    k = rotation(rng.uniform(0.0, 2.0 * math.pi)).matrix
    s = rng.uniform(-log_scale, log_scale)
    a = np.diag([math.exp(s), math.exp(-s)])
    nb = shear(rng.uniform(-shear_max, shear_max)).matrix
    m = k @ a @ nb
    # renormalise the determinant lost to rounding
    m /= math.sqrt(np.linalg.det(m))
    return SL2Element.from_matrix(m)


def alpha_coeffs(n: int) -> np.ndarray:
    """alpha_j = sqrt(C(2n-1, j-1)) for j = 1..2n."""
    n = _check_n(n)
    return np.sqrt(np.array([binom(2 * n - 1, j) for j in range(2 * n)]))


@lru_cache(maxsize=None)
def symplectic_B(n: int) -> np.ndarray:
    """B_ij = (-1)^j when i + j = 2n + 1 (1-indexed), else 0."""
    n = _check_n(n)
    m = 2 * n
    B = np.zeros((m, m))
    for i in range(1, m + 1):
        j = m + 1 - i
        B[i - 1, j - 1] = (-1.0) ** j
    B.setflags(write=False)
    return B


@lru_cache(maxsize=None)
def _z_tables(n: int):
    """Coefficients and exponents of the entries of Z(A) as polynomials in a, b, c, d."""
    m = 2 * n
    alpha = alpha_coeffs(n)
    coef = np.zeros((m, m, m + 1))
    ea = np.zeros((m, m, m + 1), dtype=int)
    eb = np.zeros_like(ea)
    ec = np.zeros_like(ea)
    ed = np.zeros_like(ea)
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            for l in range(0, m + 1):
                w = binom(j - 1, l) * binom(m - j, m - i - l)
                if w == 0.0:
                    continue
                coef[i - 1, j - 1, l] = w * alpha[j - 1] / alpha[i - 1]
                ea[i - 1, j - 1, l] = m - i - l
                eb[i - 1, j - 1, l] = l
                ec[i - 1, j - 1, l] = i + l - j
                ed[i - 1, j - 1, l] = j - l - 1
    for t in (coef, ea, eb, ec, ed):
        t.setflags(write=False)
    return coef, ea, eb, ec, ed


def rep_Z(A, n: int) -> np.ndarray:
    """The 2n x 2n matrix of A acting on R^{2n}.

    ``A`` may be an SL2Element or a (..., 2, 2) array; batched input gives a
    (..., 2n, 2n) result.
    """
    n = _check_n(n)
    M = as_matrix(A)
    coef, ea, eb, ec, ed = _z_tables(n)
    a = M[..., 0, 0][..., None, None, None]
    b = M[..., 0, 1][..., None, None, None]
    c = M[..., 1, 0][..., None, None, None]
    d = M[..., 1, 1][..., None, None, None]
    terms = coef * a ** ea * b ** eb * c ** ec * d ** ed
    return terms.sum(axis=-1)


def P_of_b(b, n: int) -> np.ndarray:
    """Closed form of Z(n_b): upper triangular, entries alpha_j/alpha_i C(j-1, j-i) b^{j-i}.

    Vectorised over ``b``: an array of shape S gives shape S + (2n, 2n).
    """
    n = _check_n(n)
    m = 2 * n
    alpha = alpha_coeffs(n)
    i = np.arange(1, m + 1)[:, None]
    j = np.arange(1, m + 1)[None, :]
    k = j - i
    coef = np.where(k >= 0, np.vectorize(binom)(j - 1, np.maximum(k, 0)) * alpha[None, :] / alpha[:, None], 0.0)
    b = np.asarray(b, dtype=float)[..., None, None]
    return coef * b ** np.maximum(k, 0)


class SpecialElements(NamedTuple):
    k_plus: SL2Element
    k_minus: SL2Element
    n_b: SL2Element
    h_b: SL2Element
    beta: float


def beta(b):
    """(1 + b^2/4)^{1/2}; works on scalars and arrays."""
    return np.sqrt(1.0 + np.square(b) / 4.0)


def special_elements(b: float) -> SpecialElements:
    bt = float(beta(b))
    k = np.array([[b / 2.0, 1.0], [-1.0, b / 2.0]]) / bt
    return SpecialElements(
        k_plus=SL2Element.from_matrix(k),
        k_minus=SL2Element.from_matrix(-k),
        n_b=shear(b),
        h_b=SL2Element(0.0, bt, -1.0 / bt, 0.0),
        beta=bt,
    )


@dataclass(frozen=True)
class HeisenbergPoint:
    u: np.ndarray
    t: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        if u.size % 2:
            raise ValueError("Heisenberg vector must have even length 2n")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.u.size // 2


@dataclass(frozen=True)
class GroupElement:
    A: SL2Element
    h: HeisenbergPoint
    n: int = field(default=0)

    def __post_init__(self):
        if self.n == 0:
            object.__setattr__(self, "n", self.h.n)
        if self.h.n != self.n:
            raise ValueError(f"vector length {self.h.u.size} does not match n={self.n}")
        _check_n(self.n)

    @classmethod
    def make(cls, A, u, t: float = 0.0) -> "GroupElement":
        if not isinstance(A, SL2Element):
            A = SL2Element.from_matrix(A)
        return cls(A, HeisenbergPoint(u, t))

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(IDENTITY, HeisenbergPoint(np.zeros(2 * n), 0.0), n)

    @property
    def u(self) -> np.ndarray:
        return self.h.u

    @property
    def t(self) -> float:
        return self.h.t

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return compose(self, other)

    def isclose(self, other: "GroupElement", atol: float = ELEMENT_ATOL) -> bool:
        return (
            self.n == other.n
            and np.allclose(self.A.matrix, other.A.matrix, rtol=0.0, atol=atol)
            and np.allclose(self.u, other.u, rtol=0.0, atol=atol)
            and abs(self.t - other.t) <= atol
        )


def compose(g: GroupElement, g2: GroupElement) -> GroupElement:
    if g.n != g2.n:
        raise ValueError(f"cannot compose elements of G_{g.n} and G_{g2.n}")
    Z = rep_Z(g.A, g.n)
    Zu2 = Z @ g2.u
    t = g.t + g2.t + g.u @ symplectic_B(g.n) @ Zu2
    return GroupElement(g.A @ g2.A, HeisenbergPoint(g.u + Zu2, t), g.n)


def inverse(g: GroupElement) -> GroupElement:
    Ainv = g.A.inverse()
    return GroupElement(Ainv, HeisenbergPoint(-rep_Z(Ainv, g.n) @ g.u, -g.t), g.n)


@dataclass(frozen=True)
class Sl2Irrep:
    n: int
    H: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def commutator_defects(self) -> tuple[int, int, int]:
        """Max-abs defects of [X,Y]=H, [H,X]=2X, [H,Y]=-2Y (integers, so exact)."""
        H, X, Y = self.H, self.X, self.Y
        return (
            int(np.abs(X @ Y - Y @ X - H).max()),
            int(np.abs(H @ X - X @ H - 2 * X).max()),
            int(np.abs(H @ Y - Y @ H + 2 * Y).max()),
        )


def sl2_irrep(n: int) -> Sl2Irrep:
    """Integer matrices of the n-dimensional irreducible sl(2) module.

    Basis E_0..E_{n-1} with H E_j = (n-1-2j) E_j.  The raising operator X sends
    E_j to j(n-j) E_{j-1} and the lowering operator Y sends E_j to E_{j+1};
    column j of each matrix is the image of E_j.
    """
    if n < 1:
        raise ValueError("n must be positive")
    H = np.diag([n - 1 - 2 * j for j in range(n)]).astype(np.int64)
    X = np.zeros((n, n), dtype=np.int64)
    Y = np.zeros((n, n), dtype=np.int64)
    for j in range(n):
        if j >= 1:
            X[j - 1, j] = j * (n - j)
        if j + 1 <= n - 1:
            Y[j + 1, j] = 1
    return Sl2Irrep(n, H, X, Y)


def invariant_forms(n: int, rel_tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of bilinear forms M with pi(U)^T M + M pi(U) = 0.

    A form is represented by its Gram matrix M, B(V, W) = V^T M W.
    """
    rep = sl2_irrep(n)
    eye = np.eye(n)
    blocks = []
    for U in (rep.H, rep.X, rep.Y):
        U = U.astype(float)
        # row-major vec: vec(A M C) = kron(A, C^T) vec(M)
        blocks.append(np.kron(U.T, eye) + np.kron(eye, U.T))
    system = np.vstack(blocks)
    _, s, vh = np.linalg.svd(system)
    full = np.zeros(n * n)
    full[: s.size] = s
    null = vh[full < rel_tol * s.max()] if s.max() > 0 else vh
    return [v.reshape(n, n) for v in null]


def rep_Z_hp(A, n: int, dps: int = 40):
    """Z(A) from the same closed form, evaluated in ``dps``-digit arithmetic.

    Returns a nested list of mpmath numbers.  Float64 storage alone limits
    Z^T B Z - B to roughly eps * max|Z|^2, which exceeds 1e-8 once entries pass
    1e4; identity checks therefore evaluate here.
    """
    import mpmath

    n = _check_n(n)
    m = 2 * n
    with mpmath.workdps(dps):
        M = A if isinstance(A, list) else [[mpmath.mpf(float(x)) for x in row] for row in as_matrix(A)]
        a, b, c, d = M[0][0], M[0][1], M[1][0], M[1][1]
        pw = [[mpmath.mpf(1)] for _ in range(4)]
        for k, base in enumerate((a, b, c, d)):
            for _ in range(m):
                pw[k].append(pw[k][-1] * base)
        alpha = [mpmath.sqrt(mpmath.binomial(m - 1, j)) for j in range(m)]
        Z = [[mpmath.mpf(0)] * m for _ in range(m)]
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                acc = mpmath.mpf(0)
                for l in range(0, m + 1):
                    w = binom(j - 1, l) * binom(m - j, m - i - l)
                    if w == 0.0:
                        continue
                    acc += int(w) * pw[0][m - i - l] * pw[1][l] * pw[2][i + l - j] * pw[3][j - l - 1]
                Z[i - 1][j - 1] = acc * alpha[j - 1] / alpha[i - 1]
        return Z


def hp_matrix(A, dps: int = 40):
    """A (2x2 or larger float array) as a nested list of ``dps``-digit mpmath numbers."""
    import mpmath

    with mpmath.workdps(dps):
        return [[mpmath.mpf(float(x)) for x in row] for row in as_matrix(A)]


def hp_matmul(X, Y, dps: int = 40):
    import mpmath

    rows, inner, cols = len(X), len(Y), len(Y[0])
    with mpmath.workdps(dps):
        return [[mpmath.fsum(X[i][k] * Y[k][j] for k in range(inner)) for j in range(cols)] for i in range(rows)]


def hp_transpose(X):
    return [list(r) for r in zip(*X)]


def hp_maxabs_diff(X, Y, dps: int = 40) -> float:
    import mpmath

    with mpmath.workdps(dps):
        return max(abs(float(x - y)) for rx, ry in zip(X, Y) for x, y in zip(rx, ry))
