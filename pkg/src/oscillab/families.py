"""Standard test functions shared by the command line and the test suites."""

from __future__ import annotations

import math

import numpy as np

from .pv_quadrature import GTestFunction, TestFunction2D, k_average


def gaussian2d(mean=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)), amp=1.0) -> TestFunction2D:
    """amp exp(-(s-mean)^T cov^{-1} (s-mean)/2), declared negligible beyond ~11 standard deviations."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    P = np.linalg.inv(cov)
    radius = math.sqrt(64.5 * np.linalg.eigvalsh(cov).max()) + np.abs(mean).max()

    def ev(s1, s2):
        d1, d2 = s1 - mean[0], s2 - mean[1]
        return amp * np.exp(-0.5 * (P[0, 0] * d1 * d1 + 2 * P[0, 1] * d1 * d2 + P[1, 1] * d2 * d2))

    return TestFunction2D(ev, radius)


def random_gaussian_mixture(rng: np.random.Generator, max_terms: int = 3) -> TestFunction2D:
    """1..max_terms Gaussians with means in [-1, 1]^2, covariance eigenvalues in [0.3, 2], amplitudes in [-1, 1]."""
    k = int(rng.integers(1, max_terms + 1))
    parts = []
    for _ in range(k):
        th = rng.uniform(0, math.pi)
        Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        cov = Q @ np.diag(rng.uniform(0.3, 2.0, 2)) @ Q.T
        parts.append(gaussian2d(rng.uniform(-1, 1, 2), cov, rng.uniform(-1, 1)))
    radius = max(p.decay_radius for p in parts)

    def ev(s1, s2):
        return sum(p.evaluator(s1, s2) for p in parts)

    return TestFunction2D(ev, radius)


def bump_u(n: int):
    # a Gaussian times a polynomial: rotations act on the polynomial by a finite
    # trigonometric sum, so an angular average with >= 8 points is exact
    return lambda u: np.exp(-0.5 * np.sum(u * u, axis=-1)) * (1 + 0.8 * u[..., n - 1] * u[..., n] + 0.3 * u[..., 0])


def bump_A(A):
    return np.exp(-0.5 * ((A[..., 0, 0] - 1) ** 2 + (A[..., 0, 1] - 0.6) ** 2 + A[..., 1, 0] ** 2 + (A[..., 1, 1] - 1) ** 2))


def bump_t(t):
    return np.exp(-t * t)


def averaged_bump(n: int, m: int = 16) -> GTestFunction:
    """K-bi-average of bump_A(A) bump_u(u) bump_t(t) on G_n."""
    return k_average(GTestFunction.separable(bump_A, bump_u(n), bump_t, n, u_radius=8.5), m)


def h0_gaussian(b, u, t):
    """exp(-b^2 - |u|^2 - t^2) on H0 (u with trailing axis n+1)."""
    return np.exp(-b * b - np.sum(u * u, axis=-1) - t * t)
