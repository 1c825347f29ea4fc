from __future__ import annotations

import math

import numpy as np
import pytest

from oscillab import decomposition as dec
from oscillab.cli import _jittered_points, random_poly
from oscillab.cutoffs import chi_j, eta
from oscillab.oscillator import KernelSpec, oR_kernel
from oscillab.phase import PolySpec

CUBIC = PolySpec((0.0, -2.0, 0.0, 1.0))


def test_piece_spec_validation():
    with pytest.raises(ValueError):
        dec.PieceSpec(KernelSpec(2, 1.0), 11, 0, r=0)
    with pytest.raises(ValueError):
        dec.T_j(0.0, 0.0, 0.0, 0.0, KernelSpec(2, 1.0), 10, 0)


def test_T_j_support_and_bound():
    rng = np.random.default_rng(0)
    spec = KernelSpec(2, 1.0, PolySpec((0.1, 0.5, -0.2)), R=2.0 ** 20)
    x = np.stack([rng.uniform(-2 ** 13, 2 ** 13, 20_000), rng.uniform(-3, 3, 20_000),
                  rng.uniform(-2 ** 13, 2 ** 13, 20_000), rng.uniform(-3, 3, 20_000)])
    T = dec.T_j(*x, spec, 12, 0)
    d, w = np.abs(x[0] - x[2]), np.abs(x[1] - x[3])
    outside = (d < 2 ** 11) | (d > 3 * 2 ** 11) | (w < 0.5) | (w > 1.5)
    assert np.all(T[outside] == 0)
    assert np.all(np.abs(T) <= 2.0 ** -12 * np.abs(chi_j(x[0] - x[2], x[1] - x[3], 12, 0)) * (1 + 1e-12))


def test_at_most_four_indices():
    rng = np.random.default_rng(1)
    spec = KernelSpec(2, 1.0, R=2.0 ** 30)
    counts = []
    for _ in range(500):
        x1, y1 = rng.uniform(-2 ** 25, 2 ** 25, 2)
        x2, y2 = rng.normal(size=2) * 10
        counts.append(len(dec.contributing_indices(x1, x2, y1, y2, spec)))
    assert max(counts) <= 4 and max(counts) >= 2


def test_T_R_sum_matches_truncated_kernel():
    # on |d| in [2^12, 2^13] every j1 carrying mass lies in (10, log2 R]
    rng = np.random.default_rng(2)
    spec = KernelSpec(2, 1.0, PolySpec((0.0, 0.3, 0.2)), R=2.0 ** 14)
    N = 2000
    x1 = rng.uniform(-1e4, 1e4, N)
    d = rng.choice([-1, 1], N) * rng.uniform(2 ** 12, 2 ** 13, N)
    x2, y2 = rng.normal(size=N), rng.normal(size=N)
    got = dec.T_R_sum(x1, x2, x1 - d, y2, spec)
    ref = oR_kernel(spec)(x1, x2, x1 - d, y2)
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1.0, np.abs(ref).max())


def test_a_m_is_one_for_quadratics():
    s = np.linspace(-100, 100, 1001)
    assert np.all(dec.a_m(s, PolySpec((1.0, -2.0, 3.0)), 5) == 1.0)


def test_cutoffs_in_unit_interval():
    rng = np.random.default_rng(3)
    X1, X2 = rng.normal(size=5000) * 100, rng.normal(size=5000) * 100
    for f in (dec.b_m(X1, X2, CUBIC, 3), dec.h_l(X1, X2, CUBIC, -2), dec.a_m(X1, CUBIC, 3),
              dec.h_lr(X1, X2, CUBIC, -2, 3)):
        assert np.all((f >= 0) & (f <= 1))


def test_h_l_is_sum_of_h_lr():
    rng = np.random.default_rng(4)
    p = PolySpec((0.2, 0.5, -0.1))
    X1 = rng.uniform(-10, 10, 3000)
    X2 = -p.deriv(1)(X1) + rng.choice([-1, 1], 3000) * 2.0 ** rng.uniform(-30, 10, 3000)
    for l in (-3, 0, 2):
        rs = dec.r_star(X1, X2, p, l)
        total = sum(dec.h_lr(X1, X2, p, l, r) for r in range(1, rs + 1))
        assert np.max(np.abs(dec.h_l(X1, X2, p, l) - total)) <= 1e-12
        assert np.all(dec.h_lr(X1, X2, p, l, rs + 1) == 0)


def test_reconstruction_cubic_n3():
    rng = np.random.default_rng(5)
    spec = KernelSpec(3, 1.0, CUBIC, R=2.0 ** 20)
    for j1, j2 in ((11, 0), (12, -2), (13, 2)):
        pts = _jittered_points(rng, CUBIC, j1, j2, 10_000)
        assert dec.reconstruction_defect(*pts, spec, j1, j2) <= 1e-10


def test_reconstruction_with_nonempty_V():
    # V-pieces need |p''| tiny against |X2 + p'(X1)|
    rng = np.random.default_rng(6)
    p = PolySpec((0.0, 1.0, 2.0 ** -30))
    spec = KernelSpec(2, 1.0, p, R=2.0 ** 20)
    pts = _jittered_points(rng, p, 12, 0, 10_000)
    P = dec.pieces(*pts, spec, 12, 0)
    assert np.abs(P["V"]).max() > 0
    assert np.max(np.abs(P["H"] + P["U"] + P["W"] + P["V"] - P["T"])) <= 1e-10


def test_V_piece_support():
    rng = np.random.default_rng(7)
    p = PolySpec((0.0, 1.0, 2.0 ** -30))
    spec = KernelSpec(2, 1.0, p, R=2.0 ** 20)
    j1, j2 = 12, 0
    x1, x2, y1, y2 = _jittered_points(rng, p, j1, j2, 20_000)
    Xi = np.abs(x2 + y2 + p.deriv(1)(x1 + y1))
    for r in (1, 3, 6):
        V = dec.V_jr(x1, x2, y1, y2, dec.PieceSpec(spec, j1, j2, r=r))
        nz = V != 0
        if nz.any():
            ratio = Xi[nz] / 2.0 ** (j2 - r + 10)
            assert ratio.min() >= 0.5 - 1e-12 and ratio.max() <= 1.5 + 1e-12


def test_L_partition_of_unity():
    rng = np.random.default_rng(8)
    x1 = rng.uniform(-50, 50, 1000)
    pp = CUBIC.deriv(2)(2 * x1)
    total = sum(eta(2.0 ** -L * pp) for L in range(-60, 61))
    assert np.max(np.abs(total - 1)) <= 1e-12


def test_W_ML_vanishing_rule():
    rng = np.random.default_rng(9)
    p = PolySpec((0.0, 0.3, 0.5))
    spec = KernelSpec(2, 1.0, p, R=2.0 ** 40)
    j1, j2 = 11, -2
    N = 20_000
    x1 = rng.uniform(-3000, 3000, N)
    for M, L in ((-2, 0), (-5, 0), (11, 0), (12, 3)):
        assert M <= j2 or L + j1 >= M
        x2 = (rng.choice([-1, 1], N) * 2.0 ** M * rng.uniform(.5, 1.5, N) - p.deriv(1)(2 * x1)) / 2
        d = rng.choice([-1, 1], N) * 2.0 ** j1 * rng.uniform(.5, 1.5, N)
        w = rng.choice([-1, 1], N) * 2.0 ** j2 * rng.uniform(.5, 1.5, N)
        assert np.all(dec.W_jML(x1, x2, x1 - d, x2 - w, dec.PieceSpec(spec, j1, j2, M=M, L=L)) == 0)


def test_W_ML_localization():
    rng = np.random.default_rng(10)
    p = PolySpec((0.0, 0.3, 0.5))
    spec = KernelSpec(2, 1.0, p, R=2.0 ** 40)
    j1, j2, N = 11, -2, 50_000
    for M in (22, 25):
        x1 = rng.uniform(-3000, 3000, N)
        x2 = (rng.choice([-1, 1], N) * 2.0 ** M * rng.uniform(.5, 1.5, N) - p.deriv(1)(2 * x1)) / 2
        d = rng.choice([-1, 1], N) * 2.0 ** j1 * rng.uniform(.5, 1.5, N)
        w = rng.choice([-1, 1], N) * 2.0 ** j2 * rng.uniform(.5, 1.5, N)
        y1, y2 = x1 - d, x2 - w
        W = dec.W_jML(x1, x2, y1, y2, dec.PieceSpec(spec, j1, j2, M=M, L=0))
        nz = W != 0
        assert nz.sum() > 1000
        X = np.abs(x2 + y2 + p.deriv(1)(x1 + y1))[nz]
        assert X.min() >= 2.0 ** (M - 2) and X.max() <= 2.0 ** (M + 2)


def test_phase_derivative_suite():
    for p in (CUBIC, PolySpec((0.3, -0.2, 0.7)), random_poly(np.random.default_rng(11), 4)):
        r = dec.lemma61_check(p, 1.0, seed=1)
        assert r.worst_relative <= 1e-6, r.worst_name
        assert r.zero_identities <= 1e-7
        assert r.triple_identity <= 1e-7


def test_taylor_stability_quartic():
    P = PolySpec((0, 0, 0, 0, 1.0))
    m = 0
    sigma = 2.0 ** (m + 13)
    assert dec.alpha_m(sigma, P, m) != 0
    r = dec.lemma62_check(P, m, sigma)
    assert r.holds and r.violations == 0
    assert r.worst_ratio <= 0.2
    assert r.derivative_constant <= 64
    with pytest.raises(ValueError):
        dec.lemma62_check(P, m, 1.0)


def test_cutoff_measure_examples():
    assert dec.lemma64_measure(PolySpec((3.0,)), 1.0, 1.0, samples=10_000).integral == 0
    r1 = dec.lemma64_measure(PolySpec((0.0, 1.0)), 1.0, 1.0, samples=200_000)
    assert r1.holds and r1.integral <= 4.0
    r2 = dec.lemma64_measure(PolySpec((0.0, 1.0)), 2.0, 1.0, samples=200_000)
    assert 0.7 * 4 <= r2.integral / r1.integral <= 1.3 * 4
    with pytest.raises(ValueError):
        dec.lemma64_measure(PolySpec(), 1.0, 1.0)
    with pytest.raises(ValueError):
        dec.lemma64_measure(PolySpec((0.0, 1.0)), 1.0, 1.0, c1=1.0, c2=-1.0)


def _UL_ratios():
    p = PolySpec((0.0, 0.0, 2.0 ** -11))
    out = []
    for j1 in (11, 12, 13):
        s = dec.PieceSpec(KernelSpec(2, 1.0, p, R=2.0 ** 20), j1, -32, L=-10)
        base = np.array([[0.0, f * 2.0 ** j1] for f in (0.0, 0.125, 0.25, 0.5)])
        out.append(dec.schur_scaling_probe("UL", s, base, per=24).ratio)
    return out


def test_schur_UL_scaling_law():
    # measured Schur size over 2^{L+2j1+j2} stays constant along the ladder
    r = _UL_ratios()
    assert max(r) / min(r) <= 1.05


@pytest.mark.xfail(reason="the measured constant is about 2^10, from the fixed cutoff offsets", strict=True)
def test_schur_UL_within_factor_32():
    assert max(_UL_ratios()) <= 32
