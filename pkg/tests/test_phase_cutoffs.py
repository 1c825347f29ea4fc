from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscillab.cutoffs import chi_1, chi_j, chi_tilde_j, dyadic_candidates, eta, eta0, smooth_step
from oscillab.phase import PolySpec, Psi, Xi, beta, phase_derivatives, theta

coords = st.floats(-5, 5)


def test_polyspec_basics():
    p = PolySpec.parse("0, 0, 1")
    assert p.coeffs == (0.0, 0.0, 1.0) and p.degree == 2
    assert PolySpec((1.0, 0.0, 0.0)).degree == 0
    assert PolySpec().is_zero
    assert p.deriv(1).coeffs == (0.0, 2.0)
    assert p.deriv(3).is_zero
    assert (p - p).is_zero
    q = p.compose_linear(-0.5, 1.0)
    assert q(np.array([0.3])) == pytest.approx(p(np.array([1.0 - 0.15])))
    with pytest.raises(ValueError):
        PolySpec.parse("")
    with pytest.raises(ValueError):
        PolySpec((1.0, math.inf))


@settings(max_examples=60, deadline=None)
@given(x1=coords, x2=coords, y1=coords, y2=coords)
def test_phase_antisymmetry(x1, x2, y1, y2):
    p = PolySpec((0.2, -0.7, 0.4, 0.1))
    assert Psi(x1, x2, x1, x2, p) == 0 and theta(x1, x2, x1, x2, p) == 0
    scale = 1 + abs(Psi(x1, x2, y1, y2, p))
    assert abs(Psi(x1, x2, y1, y2, p) + Psi(y1, y2, x1, x2, p)) <= 1e-12 * scale
    assert abs(theta(x1, x2, y1, y2, p) + theta(y1, y2, x1, x2, p)) <= 1e-12 * (1 + abs(theta(x1, x2, y1, y2, p)))


@pytest.mark.parametrize("s", [1.0, 10.0, 100.0])
def test_beta_asymptotics(s):
    assert 0 < beta(s) - s / 2 <= 1 / s
    assert beta(-s) == beta(s)


def test_first_derivatives_match_fd():
    p = PolySpec((0.3, 0.5, -0.2, 0.1))
    x = np.array([0.3, -0.7, 0.9, 1.1])
    h = 1e-6
    D = phase_derivatives(*x, p)
    for name, f, i in (("Psi_x1", Psi, 0), ("Psi_x2", Psi, 1), ("theta_x1", theta, 0), ("theta_x2", theta, 1)):
        e = np.zeros(4)
        e[i] = h
        fd = (f(*(x + e), p) - f(*(x - e), p)) / (2 * h)
        assert D[name] == pytest.approx(fd, abs=1e-8)


def test_eta0_values():
    assert eta0(0.4) == 1.0 and eta0(-0.4) == 1.0
    assert eta0(0.8) == 0.0 and eta0(0.75) == 0.0
    assert eta0(0.5) == 1.0
    s = np.linspace(-1, 1, 2001)
    v = eta0(s)
    assert np.all((v >= 0) & (v <= 1))
    assert np.allclose(v, eta0(-s), atol=0)
    # monotone on each side: one sign interval of the derivative
    right = v[s >= 0]
    assert np.all(np.diff(right) <= 1e-15)


def test_smooth_step_symmetry():
    t = np.linspace(0, 1, 101)
    assert np.allclose(smooth_step(t) + smooth_step(1 - t), 1.0, atol=1e-15)
    assert smooth_step(-1.0) == 0.0 and smooth_step(2.0) == 1.0


@pytest.mark.parametrize("s", [0.37, -0.37, 5.1, -5.1, 300.0, -300.0])
def test_dyadic_partition_of_unity(s):
    total = sum(eta(2.0 ** -j * s) for j in range(-40, 41))
    assert abs(total - 1.0) <= 1e-12


def test_eta_support():
    for s in (0.4, 1.6, -0.4, -1.6, 0.0):
        assert eta(s) == 0.0
    assert eta(1.0) > 0


def test_chi_j_cancellation():
    # odd in x2, so the symmetric midpoint rule cancels exactly
    x2 = np.linspace(-4, 4, 4001)
    for x1 in (2500.0, -3100.0):
        vals = chi_j(x1, x2, 11, 1)
        assert abs(np.sum(vals) * (x2[1] - x2[0])) <= 1e-10


def test_chi_j_support_and_requirements():
    rng = np.random.default_rng(0)
    x1 = rng.uniform(-2 ** 13, 2 ** 13, 5000)
    x2 = rng.uniform(-10, 10, 5000)
    v = chi_j(x1, x2, 11, 2)
    nz = v != 0
    assert np.all((np.abs(x1[nz]) >= 2 ** 10) & (np.abs(x1[nz]) <= 3 * 2 ** 10))
    assert np.all((np.abs(x2[nz]) >= 2) & (np.abs(x2[nz]) <= 6))
    with pytest.raises(ValueError):
        chi_j(1.0, 1.0, 0, 0)


def test_sine_evenness_identity():
    rng = np.random.default_rng(1)
    p = PolySpec((0.1, 0.4, -0.3))
    x1, x2, y1, y2 = rng.uniform(-3000, 3000, 10_000), rng.normal(size=10_000), rng.uniform(-10, 10, 10_000), rng.normal(size=10_000)
    th = theta(x1, x2, y1, y2, p)
    lhs = chi_j(x1 - y1, x2 - y2, 11, 0) * np.sin(th)
    rhs = chi_tilde_j(x1 - y1, x2 - y2, 11, 0) * np.sin(np.abs(th))
    assert np.abs(lhs - rhs).max() <= 1e-14


def test_dyadic_candidates_cover_support():
    rng = np.random.default_rng(2)
    v = np.exp(rng.uniform(-20, 20, 300)) * rng.choice([-1, 1], 300)
    cands = dyadic_candidates(v)
    for x, js in zip(v, cands):
        hits = [j for j in range(-40, 41) if eta(2.0 ** -j * x) != 0]
        assert set(hits) <= set(js.tolist())


def test_chi_1_formula():
    assert chi_1(2048.0, 11) == pytest.approx(2 ** 11 * eta(1.0) / beta(2048.0))


def test_xi_definition():
    p = PolySpec((0.0, 0.0, 1.0))
    assert Xi(1.0, 2.0, 3.0, 4.0, p) == pytest.approx(2 + 4 + 2 * 4)
