"""Acceptance criteria, one test per criterion, each printing pass/fail.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; tolerances are fixed here and nowhere else.
"""

import numpy as np
import pytest

from saddleprec import blocksys, spectral, verify
from saddleprec.assembly import ProblemSpec, assemble_system, build_spaces, dof_count
from saddleprec.cli import solve_once
from saddleprec.precond import build_preconditioner

SEED = 0


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def wave_counts():
    """Measured iteration counts for the wave problem at p = 2."""
    counts = {}
    for level in (2, 3):
        for alpha in (1.0, 1e-3, 1e-6, 1e-9):
            spec = ProblemSpec("wave", 2, level, alpha, seed=SEED)
            row = solve_once(spec, tol=1e-8)
            assert row["converged"]
            counts[level, alpha] = row["iterations"]
    return counts


def test_criterion_1_dof_reproduction():
    expected = {(2, 2): 3604, (2, 3): 28452, (3, 2): 4643, (3, 3): 32343}
    got = {key: dof_count(ProblemSpec("wave", key[0], key[1], 1e-3))
           for key in expected}
    _report("criterion 1 (DoF counts, exact)",
            got == expected, f"{got}")


def test_criterion_2_iteration_table(wave_counts):
    reference = {(2, 1e-3): 36, (2, 1e-6): 51, (2, 1e-9): 21,
                 (3, 1e-3): 38, (3, 1e-6): 48, (3, 1e-9): 33}
    ok = True
    details = []
    for (level, alpha), ref in reference.items():
        got = wave_counts[level, alpha]
        ok &= 0.5 * ref <= got <= 1.5 * ref
        details.append(f"l={level} a={alpha:g}: {got} (ref {ref})")
    for level in (2, 3):
        worst = max(wave_counts[level, a] for a in (1e-3, 1e-6, 1e-9))
        ok &= worst <= 80
        details.append(f"l={level} max over small alphas: {worst} (<= 80)")
    _report("criterion 2 (iteration table, +-50% and robustness cap)",
            ok, "; ".join(details))


def test_criterion_3_alpha_one_contrast(wave_counts):
    ok = True
    details = []
    for level in (2, 3):
        big, small = wave_counts[level, 1.0], wave_counts[level, 1e-3]
        ok &= big >= 1.5 * small
        details.append(f"l={level}: {big} vs {small}")
    _report("criterion 3 (alpha=1 at least 1.5x slower)", ok, "; ".join(details))


def test_criterion_4_state_block_equals_reference():
    ok = True
    details = []
    for p in (2, 3):
        system = assemble_system(ProblemSpec("wave", p, 2, 1e-3, seed=SEED))
        rep = verify.sparse_vs_reference_gap(system)
        ok &= rep.rel_gap <= 1e-8
        details.append(f"p={p}: rel gap {rep.rel_gap:.2e}")
    _report("criterion 4 (sparse state block = dense reference, 1e-8)",
            ok, "; ".join(details))


def test_criterion_5_residual_inclusion():
    ok = True
    details = []
    for p in (2, 3):
        system = assemble_system(ProblemSpec("wave", p, 2, 1e-3, seed=SEED))
        res = verify.inclusion_residuals(system, n_samples=20, seed=SEED)
        worst = float(res.max())
        ok &= worst <= 1e-10
        details.append(f"p={p}: worst defect {worst:.2e}")
    _report("criterion 5 (residual inclusion, 20 samples, 1e-10)",
            ok, "; ".join(details))


def test_criterion_6_constant_round_trips():
    rng = np.random.default_rng(SEED)
    trips = 0
    worst = 0.0
    while trips < 100:
        n = int(rng.integers(2, 5))
        dims = rng.integers(1, 5, size=n)
        sys_ = blocksys.random_system(rng, n, dims)
        blocks = blocksys.random_spd_blocks(rng, dims)
        c_lo, c_hi = blocksys.measure_c(sys_, blocks)
        if c_lo <= 1e-8 * c_hi:
            continue
        trips += 1
        g_lo, g_hi = blocksys.measure_gamma(sys_, blocks)
        gd_lo, gd_hi = blocksys.gamma_from_c(c_lo, c_hi)
        cd_lo, cd_hi = blocksys.c_from_gamma(g_lo, g_hi)
        worst = max(worst, gd_lo / g_lo, g_hi / gd_hi, cd_lo / c_lo,
                    c_hi / cd_hi)
    _report("criterion 6 (100 constant round trips, slack 1e-10)",
            worst <= 1 + 1e-10, f"worst bracket ratio {worst:.12f}")


def test_criterion_7_kernel_equality():
    rng = np.random.default_rng(SEED)
    checked = indeterminate = 0
    ok = True
    worst_angle = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        dims = rng.integers(1, 5, size=n)
        sys_ = blocksys.random_system(rng, n, dims, rank_deficient=True)
        chk = blocksys.kernel_equality_check(sys_)
        if chk.indeterminate:
            indeterminate += 1
            continue
        checked += 1
        ok &= chk.equal
        worst_angle = max(worst_angle, chk.max_angle)
    _report("criterion 7 (kernel equality on 100 instances, angle 1e-8)",
            ok and checked >= 90,
            f"{checked} decided, {indeterminate} indeterminate, "
            f"worst angle {worst_angle:.2e}")


def test_criterion_8_spectral_identity_oracles():
    rng = np.random.default_rng(SEED)

    def spd(n):
        g = rng.standard_normal((n, n))
        return g.T @ g + np.eye(n)

    worst_identity = 0.0
    for _ in range(100):
        nv, nq = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        inst = spectral.SchurInstance(spd(nv), rng.standard_normal((nq, nv)),
                                      spd(nq))
        q = rng.standard_normal(nq)
        lhs, rhs = spectral.schur_sup_identity(inst, q)
        if lhs > 0:
            worst_identity = max(worst_identity, abs(lhs - rhs) / lhs)
    flags_agree = True
    for _ in range(100):
        nv, nq = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        inst = spectral.SchurInstance(spd(nv), rng.standard_normal((nq, nv)),
                                      spd(nq))
        f, b = spectral.domination_equivalence(inst)
        flags_agree &= f == b
    worst_consistency = 0.0
    for _ in range(50):
        nv, nq = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        g = rng.standard_normal((nv + nq, nv + nq))
        m = g.T @ g + 0.1 * np.eye(nv + nq)
        inst = spectral.Block2x2Instance(m[:nv, :nv], m[:nv, nv:], m[nv:, nv:],
                                         m[:nv, :nv], m[nv:, nv:])
        cond, direct = spectral.block2x2_equivalence_check(inst)
        worst_consistency = max(
            worst_consistency,
            abs(cond[0][0] - 1), abs(cond[0][1] - 1),
            abs(cond[1][0] - 1), abs(cond[1][1] - 1),
            abs(direct[0] * direct[1] - cond[2][0]))
    ok = (worst_identity <= 1e-10 and flags_agree
          and worst_consistency <= 1e-10)
    _report("criterion 8 (Schur/domination/block-2x2 identities)",
            ok, f"sup identity {worst_identity:.2e}, flags agree "
                f"{flags_agree}, 2x2 consistency {worst_consistency:.2e}")


def test_criterion_9_quarter_circle_bound():
    val = blocksys.phi_min()
    _report("criterion 9 (quarter-circle minimum in [0.29, 0.30])",
            0.29 <= val <= 0.30, f"computed {val:.6f}")


def test_criterion_10_brezzi_bounds():
    system = assemble_system(ProblemSpec("wave", 2, 2, 1e-3, seed=SEED))
    ok = True
    details = []
    for alpha in (1e-3, 1e-6):
        rep = verify.measure_brezzi(system, alpha=alpha)
        ok &= rep.c_a <= 1 + 1e-8 and rep.c_b <= np.sqrt(2) + 1e-8
        details.append(
            f"a={alpha:g}: c_A={rep.c_a:.10f}, c_B={rep.c_b:.10f}, "
            f"gamma0={rep.gamma0:.4f} (reported), k0={rep.k0:.3e} (reported)")
    _report("criterion 10 (Brezzi bounds on the discrete subspace)",
            ok, "; ".join(details))


def test_criterion_11_alpha_robust_conditioning():
    kappas = {}
    spaces = None
    for alpha in (1e-3, 1e-6, 1e-9):
        spec = ProblemSpec("wave", 2, 2, alpha, seed=SEED)
        if spaces is None:
            spaces = build_spaces(spec)
        system = assemble_system(spec, spaces)
        precon = build_preconditioner(spec, spaces, system.blocks)
        rep = verify.condition_number_estimate(system, precon)
        kappas[alpha] = rep.kappa
    spread = max(kappas.values()) / min(kappas.values())
    _report("criterion 11 (condition numbers vary by at most 10x)",
            spread <= 10.0,
            ", ".join(f"a={a:g}: {k:.3f}" for a, k in kappas.items())
            + f"; spread {spread:.3f}")
