from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest

from oscillab.oscillator import (
    DiscretizedOperator,
    GridTooLargeError,
    KernelSpec,
    PhaseResolutionError,
    PolySpec,
    Xi,
    affine_h,
    b_kernel,
    b_operator_norm,
    b_required_step,
    beta,
    commutative_norm,
    discretize,
    norm_sweep,
    oR_kernel,
    op_norm,
    required_step,
    sweep_csv_text,
    write_sweep_csv,
)

SPEC = KernelSpec(1, 1.0, PolySpec(), R=1.0)
BOX = (2.0, 1.5)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(2, 0.5)
    with pytest.raises(ValueError):
        KernelSpec(1, 1.0, R=0.0)
    with pytest.raises(ValueError):
        KernelSpec(1, 1.0, PolySpec((0, 0, 1)))
    with pytest.raises(ValueError):
        KernelSpec(2, 3.0, Gamma=2.0)
    assert KernelSpec(1, 0.5).Gamma == 0.5


def test_kernel_support_and_bound():
    rng = np.random.default_rng(0)
    spec = KernelSpec(2, 1.0, PolySpec((0.3, -1.0, 0.5)), R=2.0)
    x = rng.uniform(-4, 4, size=(4, 10_000))
    K = oR_kernel(spec)(*x)
    far = np.abs(x[0] - x[2]) > 2.0
    assert np.all(K[far] == 0)
    assert np.all(np.abs(K) <= np.abs(Xi(*x, spec.p)) * (1 + 1e-12))


def test_kernel_diagonal_value():
    spec = KernelSpec(2, 1.0, PolySpec((0.0, 1.0, 0.5)), R=2.0)
    x1, x2, y1 = 0.3, 0.7, -0.4
    ph = np.exp(1j * spec.gamma * (x1 - y1) * 2 * x2 * x2)
    assert oR_kernel(spec)(x1, x2, y1, x2) == pytest.approx(ph * abs(Xi(x1, x2, y1, x2, spec.p)), abs=1e-14)


def test_kernel_real_where_phase_vanishes():
    # p = 0 and x1 = y1 give Psi = 0
    x2 = np.linspace(-1, 1, 11)
    K = oR_kernel(SPEC)(0.2, x2[:, None], 0.2, x2[None, :])
    assert np.all(K.imag == 0)


def test_phase_rule_refusal():
    req = required_step(SPEC, BOX)
    with pytest.raises(PhaseResolutionError) as e:
        discretize(SPEC, BOX, 2 * req)
    assert e.value.required == pytest.approx(req)
    with pytest.raises(GridTooLargeError):
        discretize(SPEC, BOX, None, max_points=100)


def test_apply_zero():
    op = discretize(SPEC, BOX, 0.08)
    assert np.all(op.matvec(np.zeros(op.size)) == 0)


def test_refinement_of_apply():
    g = lambda x1, x2: np.exp(-x1 ** 2 - 2 * x2 ** 2)
    norms = []
    for h in (0.1, 0.05):
        op = discretize(SPEC, BOX, h)
        norms.append(op.l2_norm(op.matvec(op.grid_values(g))))
    assert abs(norms[1] - norms[0]) <= 0.02 * norms[1]


def test_matrix_free_matches_dense():
    op = discretize(SPEC, BOX, 0.2, check_phase=False)
    rng = np.random.default_rng(1)
    g = rng.normal(size=op.size) + 1j * rng.normal(size=op.size)
    M = op.dense()
    out = np.zeros(op.size, dtype=complex)
    outH = np.zeros(op.size, dtype=complex)
    for lo in range(0, op.size, 37):
        B, c = op._block(lo, lo + 37)
        out[lo:lo + B.shape[0]] = B @ g[c]
        outH[c] += B.conj().T @ g[lo:lo + B.shape[0]]
    assert np.allclose(out, M @ g, atol=1e-12)
    assert np.allclose(outH, M.conj().T @ g, atol=1e-12)


def _identity_operator(m=20, h=0.1):
    x = h * (np.arange(m) + 0.5)
    y = np.array([0.5])

    def K(x1, x2, y1, y2):
        return np.where((x1 == y1) & (x2 == y2), 1.0 / h, 0.0)

    return DiscretizedOperator(x, y, K, h)


def test_op_norm_identity():
    est = op_norm(_identity_operator(), tol=1e-10)
    assert est.value == pytest.approx(1.0, abs=1e-10)
    assert est.converged and not est.flagged


def test_op_norm_rank_one():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=150) + 1j * rng.normal(size=150), rng.normal(size=150)
    h = 0.05
    M = np.outer(a, b.conj()) * h * h
    est = op_norm(M, tol=1e-12)
    assert est.value == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b) * h * h, rel=1e-6)


def test_op_norm_hermitian_vs_dense():
    x = np.linspace(-2, 2, 200)
    M = np.exp(-(x[:, None] - x[None, :]) ** 2) * (x[1] - x[0]) + np.diag(0.1 * np.cos(x))
    est = op_norm(M, tol=1e-13, maxiter=5000)
    assert est.value == pytest.approx(np.abs(np.linalg.eigvalsh(M)).max(), rel=1e-8)


def test_op_norm_vs_svd_and_adjoint():
    op = discretize(KernelSpec(2, 1.0, PolySpec((0, 0.5, 0.3)), R=1.0), (1.0, 0.8))
    M = op.dense()
    assert op.size <= 2000
    est = op_norm(op, tol=1e-12, maxiter=2000)
    assert est.value == pytest.approx(np.linalg.norm(M, 2), rel=1e-8)
    adj = op_norm(M.conj().T, tol=1e-12, maxiter=2000)
    assert adj.value == pytest.approx(est.value, rel=1e-8)


def test_op_norm_reports_nonconvergence():
    M = np.diag([1.0, 0.999999])
    est = op_norm(M, tol=1e-15, maxiter=3)
    assert not est.converged and est.iterations == 3 and est.residual > 0


def test_norm_sweep_small_and_csv(tmp_path):
    rows = norm_sweep(SPEC, [0.5, 2.0], pad=1.0, x2_half=1.0)
    assert [r.R for r in rows] == [0.5, 2.0]
    assert rows[1].norm >= 0.5 * rows[0].norm
    text = sweep_csv_text(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[0] == ["R", "box", "step", "norm", "iterations", "residual"]
    assert len(parsed) == 3
    out = tmp_path / "sweep.csv"
    write_sweep_csv(rows, str(out))
    assert out.read_text() == text
    assert sweep_csv_text(norm_sweep(SPEC, [0.5, 2.0], pad=1.0, x2_half=1.0)) == text
    with pytest.raises(ValueError):
        norm_sweep(SPEC, [2.0, 1.0])


def test_refinement_stability():
    spec = SPEC.with_R(1.0)
    a = op_norm(discretize(spec, BOX, 0.08), tol=1e-9).value
    b = op_norm(discretize(spec, BOX, 0.04), tol=1e-9).value
    assert abs(a - b) <= 0.03 * b


def test_sweep_at_desk_box_is_refused():
    spec = KernelSpec(2, 1.0, PolySpec((0, 0, 1)), R=10.0)
    with pytest.raises(GridTooLargeError) as e:
        norm_sweep(spec, [10.0])
    assert e.value.points > 10 ** 8


def test_commutative_examples():
    ex, num = commutative_norm(2.0)
    assert ex == pytest.approx(2 * math.pi ** 2 * math.log(1 + math.sqrt(2)))
    # the quoted 17.4001 agrees to 1.5e-4 relative
    assert ex == pytest.approx(17.4001, rel=2e-4)
    for R in (4.0, 16.0, 64.0):
        ex, num = commutative_norm(R)
        assert 0.999 <= num / ex <= 1.001
    gap = commutative_norm(256.0)[0] - commutative_norm(64.0)[0]
    assert gap == pytest.approx(2 * math.pi ** 2 * math.log(4), rel=2e-2)
    with pytest.raises(ValueError):
        commutative_norm(0.0)


def test_affine_h_small_argument_bound():
    rng = np.random.default_rng(3)
    for _ in range(30):
        j1 = int(rng.integers(1, 6))
        x2, y2 = rng.uniform(-0.1, 0.1, 2) * 2.0 ** -j1
        xi1 = rng.uniform(-1, 1)
        h = affine_h(xi1, x2, y2, j1, 1.0)
        assert abs(h) <= 4 * 2 ** j1 * abs(x2 * x2 - y2 * y2) + 1e-15


def test_affine_h_decay():
    x2, y2, g = 0.5, 0.3, 1.0
    xi1 = g * (x2 * x2 + y2 * y2) + 4 * abs(x2 * x2 - y2 * y2) + 1.0
    v1, v2 = abs(affine_h(xi1, x2, y2, 2, g)), abs(affine_h(xi1, x2, y2, 9, g))
    assert v2 <= 1e-2 * v1


def test_affine_h_methods_and_diagonal():
    assert affine_h(0.3, 0.4, 0.4, 3, 1.0) == 0
    a = affine_h(0.7, 0.5, 0.2, 4, 1.0)
    b = affine_h(0.7, 0.5, 0.2, 4, 1.0, method="dense")
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))
    with pytest.raises(ValueError):
        affine_h(0.1, 0.2, 0.3, 0, 1.0)


def test_b_kernel_diagonal_bound():
    p = PolySpec((0, 0.3, 0.02))
    K = b_kernel(3.0, -2.0, p, 1.0)
    t = np.linspace(-2, 2, 41)
    vals = K(t[:, None], t[None, :])
    bound = beta(5.0) * np.abs(Xi(3.0, t[:, None], -2.0, t[None, :], p))
    assert np.all(np.abs(vals) <= bound * (1 + 1e-12))


def test_b_operator_norm_parity():
    p = PolySpec((0.1, 0.3, 0.02))
    a = b_operator_norm(7.0, -3.0, p, 1.0, (2.0, 0.01), tol=1e-12)
    b = b_operator_norm(7.0, -3.0, -p, 1.0, (2.0, 0.01), tol=1e-12)
    assert a.value == pytest.approx(b.value, rel=1e-6)


def test_b_operator_norm_uniformity():
    # exploratory: the frozen-(x1, y1) operators stay comparable in size
    rng = np.random.default_rng(4)
    p = PolySpec((0, 0, 0.02))
    vals = []
    for x1, y1 in rng.uniform(-50, 50, size=(20, 2)):
        req = 0.9 * min(0.05, b_required_step(x1, y1, p, 1.0, 2.0))
        vals.append(b_operator_norm(x1, y1, p, 1.0, (2.0, req), tol=1e-8).value)
    assert max(vals) / min(vals) <= 10
