"""Command-line driver: invariant suites, quadrature experiments and norm sweeps.

Exit status 0 when every check passes, 1 when a check fails (its name is
printed on stderr), 2 for invalid flags.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from . import decomposition as dec
from . import induced_rep as ir
from .families import averaged_bump, h0_gaussian, random_gaussian_mixture
from .group_core import (
    MAX_N,
    P_of_b,
    hp_matmul,
    hp_matrix,
    hp_maxabs_diff,
    hp_transpose,
    invariant_forms,
    random_sl2,
    rep_Z,
    rep_Z_hp,
    shear,
    sl2_irrep,
    symplectic_B,
)
from .oscillator import (
    GridTooLargeError,
    KernelSpec,
    PhaseResolutionError,
    PolySpec,
    commutative_norm,
    norm_sweep,
    oR_kernel,
    sweep_csv_text,
    write_atomic,
)
from .pv_quadrature import D_R_eval, PVConfig, fubini_defect

PI2 = math.pi ** 2


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


class CheckFailed(RuntimeError):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


# individual checks --------------------------------------------------------

def check_symplectic(n_max: int, count: int, seed: int, tol: float = 1e-8) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        a = hp_matrix(random_sl2(rng))
        for n in range(1, n_max + 1):
            Z = rep_Z_hp(a, n)
            B = hp_matrix(symplectic_B(n))
            worst = max(worst, hp_maxabs_diff(hp_matmul(hp_matmul(hp_transpose(Z), B), Z), B))
    return Check("symplectic identity Z^T B Z = B", worst <= tol, f"max residual {fmt(worst)}")


def check_homomorphism(n_max: int, count: int, seed: int, tol: float = 1e-8) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        a, a2 = hp_matrix(random_sl2(rng)), hp_matrix(random_sl2(rng))
        for n in range(1, n_max + 1):
            worst = max(worst, hp_maxabs_diff(rep_Z_hp(hp_matmul(a, a2), n), hp_matmul(rep_Z_hp(a, n), rep_Z_hp(a2, n))))
    return Check("homomorphism Z(AA') = Z(A)Z(A')", worst <= tol, f"max residual {fmt(worst)}")


def check_shear_forms(n_max: int, tol: float = 1e-10) -> Check:
    worst = 0.0
    for n in range(1, n_max + 1):
        for b in np.linspace(-3, 3, 13):
            P = P_of_b(b, n)
            worst = max(worst, float(np.abs(P - rep_Z(shear(b), n)).max() / max(1.0, np.abs(P).max())))
            worst = max(worst, abs(P[n - 1, n] - n * b))
    return Check("closed form P(b) and P(b)_{n,n+1} = nb", worst <= tol, f"max residual {fmt(worst)}")


def check_irreps(n_max: int = 8) -> Check:
    bad = []
    for n in range(1, n_max + 1):
        rep = sl2_irrep(n)
        forms = invariant_forms(n)
        sym = len(forms) == 1 and np.abs(forms[0] - forms[0].T).max() <= 1e-10
        if rep.commutator_defects() != (0, 0, 0) or len(forms) != 1 or sym != bool(n % 2):
            bad.append(n)
    return Check("sl(2) irreps and invariant forms", not bad, f"failing dimensions {bad}" if bad else f"n = 1..{n_max}")


def check_fubini(count: int, seed: int, tol: float) -> Check:
    rng = np.random.default_rng(seed)
    worst = max(fubini_defect(random_gaussian_mixture(rng)) for _ in range(count))
    return Check("iterated principal values D + D~ = pi^2 delta", worst <= tol,
                 f"max defect {fmt(worst)} over {count} mixtures (tol {fmt(tol)})")


def dr_pair(n: int, R: float, m: int = 16) -> tuple[complex, float]:
    phi = averaged_bump(n, m)
    lhs = D_R_eval(phi, R, n, PVConfig(panel=1.0, order=8, k_max=12), b_order=2, b_width=min(0.25, R / 4))
    rhs = PI2 / 2 * integrate.quad(
        lambda b: float(phi(shear(b).matrix, np.zeros(2 * n), 0.0)) / math.sqrt(1 + b * b / 4), -R, R, epsabs=1e-13
    )[0]
    return lhs.value, rhs


def check_dr(n: int, R: float, tol: float) -> Check:
    lhs, rhs = dr_pair(n, R)
    rel = abs(lhs - rhs) / abs(rhs)
    return Check(f"D_R of a bi-invariant bump (n={n}, R={fmt(R)})", rel <= tol,
                 f"D_R {fmt(lhs.real)}, reference {fmt(rhs)}, relative {fmt(rel)}")


def check_commutative(Rs: Sequence[float] = (4.0, 16.0, 64.0)) -> Check:
    vals = [commutative_norm(R) for R in Rs]
    rel = max(abs(num - ex) / ex for ex, num in vals)
    ex = [e for e, _ in vals]
    gaps = [b - a for a, b in zip(ex, ex[1:])]
    target = 2 * PI2 * math.log(4)
    ok = rel <= 1e-3 and all(g > 0 for g in gaps) and all(abs(g - target) <= 0.05 * target for g in gaps)
    return Check("commutative comparison 2 pi^2 asinh(R/2)", ok,
                 f"max relative {fmt(rel)}, gaps {', '.join(fmt(g) for g in gaps)} vs {fmt(target)}")


def check_rep_homomorphism(n: int, seed: int, points: int = 100, tol: float = 1e-9) -> Check:
    rng = np.random.default_rng(seed)
    params = ir.RepParams(n, rng.normal(), rng.normal(size=n))
    xi = ir.StateFunction(lambda c, v: np.exp(-c * c - v * v + 0.3j * c * v))
    g = ir.H0Element(rng.normal(), rng.normal(size=n + 1), rng.normal())
    g2 = ir.H0Element(rng.normal(), rng.normal(size=n + 1), rng.normal())
    c, v = rng.normal(size=points), rng.normal(size=points)
    a = ir.pi_apply(g, ir.pi_apply(g2, xi, params), params)(c, v)
    b = ir.pi_apply(ir.h0_compose(g, g2), xi, params)(c, v)
    hom = float(np.abs(a - b).max())
    uni = float(np.abs(np.abs(ir.pi_apply(g, xi, params)(c, v)) - np.abs(xi(c - g.b, v - g.u[n]))).max())
    return Check(f"induced representation homomorphism and unimodularity (n={n})", max(hom, uni) <= tol,
                 f"homomorphism {fmt(hom)}, modulus {fmt(uni)}")


def check_keystone(n: int, seed: int, points: int = 10_000, R: float = 2.0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for eta in (1.0, -1.0):
        params = ir.RepParams(n, eta, rng.normal(size=n))
        p = ir.p_from_zeta(params)
        # eta = -1 is the conjugate of eta = 1 with p -> -p
        spec = KernelSpec(n, n / 2.0, p if eta > 0 else -p, R=R, Gamma=max(1.0, n / 2.0))
        x = rng.uniform(-3, 3, size=(4, points))
        k = ir.dr_kernel(params, R)(*x)
        ref = math.pi * oR_kernel(spec)(*x)
        if eta < 0:
            ref = np.conj(ref)
        worst = max(worst, float(np.max(np.abs(k - ref) / (1 + np.abs(ref)))))
    return Check(f"dr_kernel = pi oR_kernel at gamma = n/2 (n={n})", worst <= 1e-12, f"max scaled diff {fmt(worst)}")


def check_parseval(lo: float = 0.98, hi: float = 1.02) -> Check:
    rep = ir.parseval_ratio(h0_gaussian, 1)
    return Check("Plancherel isometry (n=1)", lo <= rep.ratio <= hi,
                 f"ratio {fmt(rep.ratio)}, frequency-box edge mass {fmt(rep.edge_fraction)}")


def _jittered_points(rng, p: PolySpec, j1: int, j2: int, N: int):
    d = rng.choice([-1, 1], N) * 2.0 ** j1 * rng.uniform(0.55, 1.45, N)
    w = rng.choice([-1, 1], N) * 2.0 ** j2 * rng.uniform(0.55, 1.45, N)
    S1 = rng.choice([-1, 1], N) * 2.0 ** rng.uniform(0, j1 + 14, N)
    S2 = -p.deriv(1)(S1) + rng.choice([-1, 1], N) * 2.0 ** rng.uniform(j2 - 12, j1 + 14, N)
    return (S1 + d) / 2, (S2 + w) / 2, (S1 - d) / 2, (S2 - w) / 2


def random_poly(rng, deg: int) -> PolySpec:
    lead = rng.choice([-1.0, 1.0]) * 2.0 ** rng.uniform(-30, 0)
    return PolySpec(tuple(rng.uniform(-1, 1, deg)) + (lead,))


def check_reconstruction(count: int, seed: int, points: int = 10_000, tol: float = 1e-10) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(count):
        deg = 2 + k % 3
        p = random_poly(rng, deg)
        spec = KernelSpec(deg, 1.0, p, R=2.0 ** 20)
        j1, j2 = int(rng.integers(11, 15)), int(rng.integers(-3, 4))
        worst = max(worst, dec.reconstruction_defect(*_jittered_points(rng, p, j1, j2, points), spec, j1, j2))
    return Check("splitting T_j = H + U + W + sum_r V^r", worst <= tol, f"max defect {fmt(worst)} over {count} polynomials")


def check_phase_derivatives(p: PolySpec, seed: int) -> Check:
    r = dec.lemma61_check(p, 1.0, seed=seed)
    ok = r.worst_relative <= 1e-6 and r.zero_identities <= 1e-7 and r.triple_identity <= 1e-7
    return Check("closed-form phase derivatives vs finite differences", ok,
                 f"worst {fmt(r.worst_relative)} ({r.worst_name}), zero identities {fmt(r.zero_identities)}, "
                 f"Psi_x2x2y1 + 2 {fmt(r.triple_identity)}")


# subcommands --------------------------------------------------------------

def _report(checks: List[Check], out=None) -> int:
    out = out or sys.stdout
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}", file=out)
    for c in failed:
        print(f"check failed: {c.name}", file=sys.stderr)
    return 1 if failed else 0


def cmd_verify(a) -> int:
    n = a.n
    suites = {
        "group_core": [check_symplectic(n, 20, a.seed), check_homomorphism(n, 20, a.seed + 1),
                       check_shear_forms(n), check_irreps()],
        "pv_quadrature": [check_fubini(3, a.seed, 1e-3 * PI2)],
        "induced_rep": [check_rep_homomorphism(n, a.seed), check_keystone(n, a.seed, 2000)],
        "oscillator": [check_commutative()],
        "decomposition": [check_reconstruction(3, a.seed, 2000), check_phase_derivatives(random_poly(np.random.default_rng(a.seed), 3), a.seed)],
    }
    allc = []
    for name, cs in suites.items():
        print(f"{name}: {sum(c.passed for c in cs)}/{len(cs)} passed")
        allc.extend(cs)
    return _report(allc)


def cmd_fubini(a) -> int:
    if a.family != "gaussians":
        raise CheckFailed(f"unknown family {a.family}")
    tol = a.tol if a.tol is not None else 1e-3 * PI2
    return _report([check_fubini(a.count, a.seed, tol)])


def cmd_dr_eval(a) -> int:
    tol = a.tol if a.tol is not None else 5e-2
    return _report([check_dr(a.n, R, tol) for R in a.R])


def cmd_rep_check(a) -> int:
    checks = [check_rep_homomorphism(a.n, a.seed), check_keystone(a.n, a.seed)]
    if a.n == 1:
        checks.append(check_parseval())
    return _report(checks)


def cmd_norm_sweep(a) -> int:
    pad, x2_half = a.box
    spec = KernelSpec(a.n, a.gamma, a.poly, R=a.R[0], Gamma=max(abs(a.gamma), 1.0))
    try:
        rows = norm_sweep(spec, a.R, pad=pad, x2_half=x2_half, h=a.step, tol=a.tol or 1e-8,
                          max_points=a.max_points, seed=a.seed)
    except (GridTooLargeError, PhaseResolutionError) as e:
        print(f"check failed: phase-resolution rule for the norm sweep ({e})", file=sys.stderr)
        return 1
    text = sweep_csv_text(rows)
    if a.out:
        write_atomic(a.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_decomp_check(a) -> int:
    p = a.poly if a.poly is not None else PolySpec((0.0, -2.0, 0.0, 1.0))
    n = max(a.n, p.degree, 2)
    spec = KernelSpec(n, 1.0, p, R=2.0 ** 20)
    rng = np.random.default_rng(a.seed)
    worst = 0.0
    for j1, j2 in ((11, 0), (12, -2), (13, 2)):
        worst = max(worst, dec.reconstruction_defect(*_jittered_points(rng, p, j1, j2, 10_000), spec, j1, j2))
    checks = [Check("splitting T_j = H + U + W + sum_r V^r", worst <= 1e-10, f"max defect {fmt(worst)}"),
              check_phase_derivatives(p, a.seed)]
    return _report(checks)


# argument parsing ---------------------------------------------------------

def _floats(text: str) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _poly(text: str) -> PolySpec:
    try:
        return PolySpec.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _box(text: str) -> tuple[float, float]:
    v = _floats(text)
    if len(v) != 2 or min(v) <= 0:
        raise argparse.ArgumentTypeError("--box takes PAD,X2HALF with positive entries")
    return v[0], v[1]


def _n(text: str) -> int:
    n = int(text)
    if not 1 <= n <= MAX_N:
        raise argparse.ArgumentTypeError(f"n must be in 1..{MAX_N}")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscillab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, n_default=1):
        p.add_argument("--n", type=_n, default=n_default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("verify", help="run all invariant suites")
    common(p, 2)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fubini", help="D + D~ = pi^2 delta on random test functions")
    common(p)
    p.add_argument("--family", choices=["gaussians"], default="gaussians")
    p.add_argument("--count", type=int, default=20)
    p.set_defaults(func=cmd_fubini)

    p = sub.add_parser("dr-eval", help="D_R of a K-bi-invariant bump against its closed form")
    common(p)
    p.add_argument("--R", type=_floats, default=[1.0])
    p.set_defaults(func=cmd_dr_eval)

    p = sub.add_parser("rep-check", help="induced representation and kernel identities")
    common(p)
    p.set_defaults(func=cmd_rep_check)

    p = sub.add_parser("norm-sweep", help="operator norms of the truncated oscillatory operator")
    common(p, 2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--poly", type=_poly, default=PolySpec())
    p.add_argument("--R", type=_floats, required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--box", type=_box, default=(8.0, 8.0), help="PAD,X2HALF: x1 in +-(R+PAD), x2 in +-X2HALF")
    p.add_argument("--max-points", type=int, default=8192)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_norm_sweep)

    p = sub.add_parser("decomp-check", help="dyadic splitting and derivative identities")
    common(p, 3)
    p.add_argument("--poly", type=_poly, default=None)
    p.set_defaults(func=cmd_decomp_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        return a.func(a)
    except ValueError as e:
        # preconditions of the numerical modules
        print(f"{ap.prog} {a.command}: error: {e}", file=sys.stderr)
        return 2
    except CheckFailed as e:
        print(f"check failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
