"""Numeric oracles for Schur-complement and block-diagonal equivalence identities.

Small dense instances only. Spectral equivalence is witnessed by returning
the extreme constants; pass/fail thresholds belong to the test layer.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, eigh

from .blocksys import BlockTridiagonalSystem, _check_inner_product_blocks

SPD_RTOL = 1e-12
PSD_DECISION_RTOL = 1e-10


def _require_spd(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    nrm = np.linalg.norm(mat, 2)
    if nrm == 0.0 or np.max(np.abs(mat - mat.T)) > 1e-12 * nrm:
        raise ValueError(f"{what} must be symmetric and nonzero")
    lo = eigh(mat, eigvals_only=True, subset_by_index=[0, 0])[0]
    if lo <= SPD_RTOL * nrm:
        raise ValueError(f"{what} is not positive definite")
    return mat


@dataclass
class SchurInstance:
    """Coercive A on V, coupling B: V -> Q', coercive C on Q."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = _require_spd(self.a, "A")
        self.c = _require_spd(self.c, "C")
        self.b = np.asarray(self.b, dtype=float)
        if self.b.shape != (self.c.shape[0], self.a.shape[0]):
            raise ValueError("B must map V into Q'")


@dataclass
class Block2x2Instance:
    """Symmetric positive definite 2x2 block operator and an SPD block diagonal."""

    m11: np.ndarray
    m12: np.ndarray
    m22: np.ndarray
    d11: np.ndarray
    d22: np.ndarray

    def __post_init__(self):
        self.m11 = np.asarray(self.m11, dtype=float)
        self.m12 = np.asarray(self.m12, dtype=float)
        self.m22 = np.asarray(self.m22, dtype=float)
        self.d11 = _require_spd(self.d11, "D11")
        self.d22 = _require_spd(self.d22, "D22")
        _require_spd(self.full(), "assembled 2x2 operator")

    def full(self) -> np.ndarray:
        return np.block([[self.m11, self.m12], [self.m12.T, self.m22]])

    def diag(self) -> np.ndarray:
        return block_diag(self.d11, self.d22)


def schur_sup_identity(inst: SchurInstance, q: np.ndarray):
    """Both sides of <B A^{-1} B' q, q> = sup_v <Bv, q>^2 / <Av, v>.

    The supremum is evaluated at its analytic maximizer v* = A^{-1} B' q.
    """
    q = np.asarray(q, dtype=float)
    bq = inst.b.T @ q
    lhs = float(bq @ np.linalg.solve(inst.a, bq))
    v_star = np.linalg.solve(inst.a, bq)
    denom = float(v_star @ (inst.a @ v_star))
    rhs = 0.0 if denom == 0.0 else float((inst.b @ v_star @ q) ** 2 / denom)
    return lhs, rhs


def domination_equivalence(inst: SchurInstance):
    """Decide B A^{-1} B' <= C and B' C^{-1} B <= A by smallest eigenvalue.

    The two flags are equal in exact arithmetic; both are returned so the
    equivalence can be witnessed.
    """
    s1 = inst.c - inst.b @ np.linalg.solve(inst.a, inst.b.T)
    s2 = inst.a - inst.b.T @ np.linalg.solve(inst.c, inst.b)

    def is_psd(mat):
        nrm = np.linalg.norm(mat, 2)
        lo = eigh(mat, eigvals_only=True, subset_by_index=[0, 0])[0]
        return bool(lo >= -PSD_DECISION_RTOL * max(nrm, 1.0))

    return is_psd(s1), is_psd(s2)


def block2x2_equivalence_check(inst: Block2x2Instance):
    """Constants for the three block-diagonal equivalence conditions and the direct bounds.

    Conditions: M11 vs D11, M22 vs D22, and the Schur complement
    M11 - M12 M22^{-1} M21 vs M11 (the one-sided domination). The direct
    bounds are the extreme generalized eigenvalues of the assembled operator
    versus the block diagonal.
    """
    cond = []
    for m, d in ((inst.m11, inst.d11), (inst.m22, inst.d22)):
        ev = eigh(m, d, eigvals_only=True)
        cond.append((float(ev[0]), float(ev[-1])))
    schur = inst.m11 - inst.m12 @ np.linalg.solve(inst.m22, inst.m12.T)
    ev = eigh(schur, inst.m11, eigvals_only=True)
    cond.append((float(ev[0]), float(ev[-1])))
    ev = eigh(inst.full(), inst.diag(), eigvals_only=True)
    direct = (float(ev[0]), float(ev[-1]))
    return cond, direct


def check_condition_n(sys: BlockTridiagonalSystem, inner_blocks):
    """Per-condition spectral bounds for the block-diagonal equivalence, n in {2, 3, 4}.

    For each condition the right-hand side combines the unsigned diagonal
    blocks with coupled products through the inner-product inverses; the
    bounds are the extreme generalized eigenvalues against the matching
    inner-product blocks. Jointly (the conditions are an odd/even block
    permutation of the full relation) they reproduce measure_gamma.
    """
    n = sys.n
    if n not in (2, 3, 4):
        raise ValueError("conditions are spelled out for n in {2, 3, 4} only")
    P = _check_inner_product_blocks(inner_blocks, sys.block_dims)
    Pi = [np.linalg.inv(p) for p in P]
    A = sys.diag
    B = sys.off

    def bounds(rhs, lhs):
        ev = eigh(rhs, lhs, eigvals_only=True)
        return float(ev[0]), float(ev[-1])

    if n == 2:
        c1 = A[0] + B[0].T @ Pi[1] @ B[0]
        c2 = A[1] + B[0] @ Pi[0] @ B[0].T
        return [bounds(c1, P[0]), bounds(c2, P[1])]

    if n == 3:
        odd = np.block([
            [A[0] + B[0].T @ Pi[1] @ B[0], B[0].T @ Pi[1] @ B[1].T],
            [B[1] @ Pi[1] @ B[0], A[2] + B[1] @ Pi[1] @ B[1].T],
        ])
        even = A[1] + B[0] @ Pi[0] @ B[0].T + B[1].T @ Pi[2] @ B[1]
        return [bounds(odd, block_diag(P[0], P[2])), bounds(even, P[1])]

    odd = np.block([
        [A[0] + B[0].T @ Pi[1] @ B[0], B[0].T @ Pi[1] @ B[1].T],
        [B[1] @ Pi[1] @ B[0],
         A[2] + B[1] @ Pi[1] @ B[1].T + B[2].T @ Pi[3] @ B[2]],
    ])
    even = np.block([
        [A[1] + B[0] @ Pi[0] @ B[0].T + B[1].T @ Pi[2] @ B[1],
         B[1].T @ Pi[2] @ B[2].T],
        [B[2] @ Pi[2] @ B[1], A[3] + B[2] @ Pi[2] @ B[2].T],
    ])
    return [bounds(odd, block_diag(P[0], P[2])),
            bounds(even, block_diag(P[1], P[3]))]
