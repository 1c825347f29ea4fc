"""Polynomials, the weight beta and the phase functions Psi, theta, Xi with their derivatives.

Points are passed as four broadcastable arrays ``(x1, x2, y1, y2)``.  With
d = x1 - y1, w = x2 - y2 and S = x1 + y1:

    Psi   = d (x2^2 + y2^2) - w p(S)
    Xi    = x2 + y2 + p'(S)
    theta = beta(d) |Xi| w

Both Psi and theta are antisymmetric under x <-> y.  ``sgn(0) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly


@dataclass(frozen=True)
class PolySpec:
    """Real polynomial in the monomial basis, constant term first."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        c = [float(v) for v in np.atleast_1d(np.asarray(self.coeffs, dtype=float))]
        if not all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c) if c else (0.0,))

    @classmethod
    def parse(cls, text: str) -> "PolySpec":
        """'0,0,1' -> s^2."""
        parts = [t for t in text.replace(" ", "").split(",") if t]
        if not parts:
            raise ValueError("empty polynomial")
        return cls(tuple(float(t) for t in parts))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), self.coeffs)

    def deriv(self, k: int = 1) -> "PolySpec":
        if k == 0:
            return self
        return PolySpec(tuple(npoly.polyder(self.coeffs, k)) if self.degree >= k else (0.0,))

    def __neg__(self) -> "PolySpec":
        return PolySpec(tuple(-c for c in self.coeffs))

    def __add__(self, other: "PolySpec") -> "PolySpec":
        return PolySpec(tuple(npoly.polyadd(self.coeffs, other.coeffs)))

    def __sub__(self, other: "PolySpec") -> "PolySpec":
        return self + (-other)

    def compose_linear(self, a: float, b: float = 0.0) -> "PolySpec":
        """s -> p(a s + b)."""
        out = np.zeros(1)
        lin = np.array([b, a], dtype=float)
        power = np.ones(1)
        for c in self.coeffs:
            out = npoly.polyadd(out, c * power)
            power = npoly.polymul(power, lin)
        return PolySpec(tuple(out))

    def max_abs_coeff_diff(self, other: "PolySpec") -> float:
        a, b = np.array(self.coeffs), np.array(other.coeffs)
        m = max(a.size, b.size)
        return float(np.abs(np.pad(a, (0, m - a.size)) - np.pad(b, (0, m - b.size))).max())


def beta(s):
    return np.sqrt(1.0 + np.square(s) / 4.0)


def beta_d1(s):
    return np.asarray(s) / (4.0 * beta(s))


def beta_d2(s):
    return 1.0 / (4.0 * beta(s) ** 3)


def Xi(x1, x2, y1, y2, p: PolySpec):
    return x2 + y2 + p.deriv(1)(x1 + y1)


def Psi(x1, x2, y1, y2, p: PolySpec):
    return (x1 - y1) * (x2 * x2 + y2 * y2) - (x2 - y2) * p(x1 + y1)


def theta(x1, x2, y1, y2, p: PolySpec):
    return beta(x1 - y1) * np.abs(Xi(x1, x2, y1, y2, p)) * (x2 - y2)


def _pieces(x1, x2, y1, y2, p):
    d, S = x1 - y1, x1 + y1
    X = Xi(x1, x2, y1, y2, p)
    return d, x2 - y2, S, X, np.sign(X), np.abs(X)


def phase_derivatives(x1, x2, y1, y2, p: PolySpec) -> Dict[str, np.ndarray]:
    """Closed-form partial derivatives of Psi and theta (valid where Xi != 0)."""
    d, w, S, X, sg, aX = _pieces(x1, x2, y1, y2, p)
    p1, p2, p3 = p.deriv(1)(S), p.deriv(2)(S), p.deriv(3)(S)
    b, b1, b2 = beta(d), beta_d1(d), beta_d2(d)
    zero = np.zeros(np.broadcast(x1, x2, y1, y2).shape)
    return {
        "Psi_x1": 2 * x2 * x2 - w * X,
        "Psi_x2": 2 * x2 * d - p(S),
        "theta_x1": w * (b1 * aX + b * p2 * sg),
        "theta_x2": b * (2 * x2 + p1) * sg,
        "Psi_x1y1": -w * p2,
        "theta_x1y1": w * (b * p3 * sg - b2 * aX),
        "Psi_x1y2": 2 * y2 + p1 + zero,
        "Psi_x2y1": -(2 * x2 + p1) + zero,
        "theta_x1y2": (-b * p2 - b1 * (2 * y2 + p1)) * sg,
        "theta_x2y1": (b * p2 - b1 * (2 * x2 + p1)) * sg,
        "Psi_x2x2y1": -2.0 + zero,
        "theta_x2x2y1": -2.0 * b1 * sg,
        "Psi_x2y2": zero,
        "theta_x2y2": zero,
    }


def phase_gradient_norm(x1, x2, y1, y2, p: PolySpec, gamma: float):
    """Largest Euclidean norm over the signs of grad_x(gamma Psi +- theta)."""
    D = phase_derivatives(x1, x2, y1, y2, p)
    out = 0.0
    for s in (1.0, -1.0):
        g1 = gamma * D["Psi_x1"] + s * D["theta_x1"]
        g2 = gamma * D["Psi_x2"] + s * D["theta_x2"]
        out = np.maximum(out, np.hypot(g1, g2))
    return out
