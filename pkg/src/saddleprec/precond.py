"""Block-diagonal preconditioner for the discrete optimality systems.

The state block realizes the weighted norm

    |y|^2 = (y, y)_{L2(q_T)} + alpha * |state residual|^2_{L2(Q_T)}
            + |grad y(0)|^2_{L2} [+ |d_t y(0)|^2_{L2} for the wave problem]

assembled directly as a sparse sum of Kronecker terms and factorized by a
sparse direct solver. The control and initial-velocity blocks are pure
tensor-product mass matrices and are inverted by univariate Cholesky sweeps;
the initial-displacement block (a 2-D stiffness, not a pure tensor product)
goes through the sparse direct path. A dense reference for the state block,
built from the system blocks through explicit mass inverses, witnesses that
the sparse block equals the operator-preconditioning candidate whenever the
residual inclusion holds.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import DiscreteSpaces, ProblemSpec, SystemBlocks, _restrict
from .kron import KroneckerMatrix, KroneckerSolver
from .splines import endpoint_row, univariate_matrix


@dataclass
class ContinuousNormSpec:
    """Weights of the preconditioner norm terms for a given regularization weight."""

    observation: float
    state_residual: float
    trace_displacement: float
    trace_velocity: float
    control: float
    multiplier: float
    r1: float
    r2: float

    @classmethod
    def for_problem(cls, spec: ProblemSpec) -> "ContinuousNormSpec":
        a = spec.alpha
        return cls(
            observation=1.0,
            state_residual=a,
            trace_displacement=1.0,
            trace_velocity=1.0 if spec.is_wave else 0.0,
            control=a,
            multiplier=1.0 / a,
            r1=1.0,
            r2=1.0 if spec.is_wave else 0.0,
        )

    def __post_init__(self):
        active = [self.observation, self.state_residual, self.trace_displacement,
                  self.control, self.multiplier, self.r1]
        if any(w <= 0 for w in active):
            raise ValueError("norm weights must be positive for alpha > 0")


def state_residual_form(spec: ProblemSpec, spaces: DiscreteSpaces) -> KroneckerMatrix:
    """Gram matrix of the state residual ((d_tt|d_t) - Lap) on the state space.

    Expanding the product of two residuals gives nine Kronecker terms; mixed
    time/space terms enter with a negative sign.
    """
    yt, yx, yy = spaces.y_time, spaces.y_x, spaces.y_y
    ix, iy = spaces.ix, spaces.iy

    def t(dr, dc):
        return univariate_matrix(yt, yt, dr, dc).entries

    def x(dr, dc):
        return _restrict(univariate_matrix(yx, yx, dr, dc).entries, ix, ix)

    def y(dr, dc):
        return _restrict(univariate_matrix(yy, yy, dr, dc).entries, iy, iy)

    dt = 2 if spec.is_wave else 1
    # mixed terms are built from one factor and its transpose so the term
    # list pairs up exactly; summation-order roundoff is removed by the
    # symmetrization in materialization helpers below
    t_d0 = t(dt, 0)
    x_20, y_20 = x(2, 0), y(2, 0)
    km = KroneckerMatrix()
    km.add(+1.0, t(dt, dt), x(0, 0), y(0, 0))
    km.add(-1.0, t_d0, x_20.T, y(0, 0))
    km.add(-1.0, t_d0, x(0, 0), y_20.T)
    km.add(-1.0, t_d0.T, x_20, y(0, 0))
    km.add(-1.0, t_d0.T, x(0, 0), y_20)
    km.add(+1.0, t(0, 0), x(2, 2), y(0, 0))
    km.add(+1.0, t(0, 0), x_20, y_20.T)
    km.add(+1.0, t(0, 0), x_20.T, y_20)
    km.add(+1.0, t(0, 0), x(0, 0), y(2, 2))
    return km


def trace_displacement_form(spaces: DiscreteSpaces) -> KroneckerMatrix:
    """(grad y(0), grad z(0)) as endpoint-row outer product tensor the 2-D stiffness."""
    e0 = endpoint_row(spaces.y_time, "a", 0)
    E00 = np.outer(e0, e0)
    sx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 1, 1).entries,
                   spaces.ix, spaces.ix)
    sy = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 1, 1).entries,
                   spaces.iy, spaces.iy)
    mx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries,
                   spaces.ix, spaces.ix)
    my = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries,
                   spaces.iy, spaces.iy)
    km = KroneckerMatrix()
    km.add(1.0, E00, sx, my)
    km.add(1.0, E00, mx, sy)
    return km


def trace_velocity_form(spaces: DiscreteSpaces) -> KroneckerMatrix:
    """(d_t y(0), d_t z(0)) as first-derivative endpoint rows tensor the 2-D mass."""
    e1 = endpoint_row(spaces.y_time, "a", 1)
    E11 = np.outer(e1, e1)
    mx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries,
                   spaces.ix, spaces.ix)
    my = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries,
                   spaces.iy, spaces.iy)
    km = KroneckerMatrix()
    km.add(1.0, E11, mx, my)
    return km


def _symmetrize(mat: sp.spmatrix) -> sp.csr_matrix:
    """Remove summation-order roundoff: exact bitwise symmetry."""
    return (0.5 * (mat + mat.T)).tocsr()


def y_norm_gram(spec: ProblemSpec, spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Gram matrix of the graph norm of the state operator (residual + traces)."""
    g = state_residual_form(spec, spaces).materialize()
    g = g + trace_displacement_form(spaces).materialize()
    if spec.is_wave:
        g = g + trace_velocity_form(spaces).materialize()
    return _symmetrize(g)


def _u_mass_factors(spaces: DiscreteSpaces):
    return [univariate_matrix(s, s, 0, 0).entries
            for s in (spaces.u_time, spaces.u_x, spaces.u_y)]


def _r2_mass_factors(spaces: DiscreteSpaces):
    return [univariate_matrix(s, s, 0, 0).entries
            for s in (spaces.y_x, spaces.y_y)]


class BlockDiagPreconditioner:
    """Factored diagonal blocks of the preconditioner, in system block order.

    Block scaling follows diag(P_Y, alpha P_U, alpha^{-1} P_U, P_R1[, P_R2]).
    The control-mass and initial-velocity blocks share Cholesky factors across
    alpha values (only the scale changes); the state block is reassembled and
    refactorized on rebuild because alpha enters its bilinear form.
    """

    def __init__(self, spec, spaces, blocks, alpha=None):
        self.spec = spec
        self.spaces = spaces
        self.blocks = blocks
        self.alpha = spec.alpha if alpha is None else float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.norms = ContinuousNormSpec.for_problem(spec)

        # alpha-independent pieces of the state block, kept for rebuilds
        self._obs = blocks.observation
        self._residual = state_residual_form(spec, spaces).materialize()
        self._trace = trace_displacement_form(spaces).materialize()
        if spec.is_wave:
            self._trace = self._trace + trace_velocity_form(spaces).materialize()

        self._u_solver = KroneckerSolver(_u_mass_factors(spaces))
        self._r1_lu = splu(blocks.r1_gram.tocsc())
        if spec.is_wave:
            self._r2_solver = KroneckerSolver(_r2_mass_factors(spaces))
        self._build_y_block()

        self.block_names = ("y", "u", "p_u", "p_r1") + (
            ("p_r2",) if spec.is_wave else ())
        dims = [spaces.dim_y, spaces.dim_u, spaces.dim_u, spaces.dim_r1]
        if spec.is_wave:
            dims.append(spaces.dim_r2)
        self.block_dims = tuple(dims)
        self._offsets = np.concatenate([[0], np.cumsum(self.block_dims)])

    def _build_y_block(self):
        p_y = _symmetrize(
            self._obs + self.alpha * self._residual + self._trace).tocsc()
        self._p_y = p_y.tocsr()
        try:
            self._y_lu = splu(p_y)
        except RuntimeError as exc:  # pragma: no cover - signals an assembly bug
            raise ValueError(f"state block factorization failed: {exc}") from exc

    def rebuild(self, alpha: float) -> "BlockDiagPreconditioner":
        """Switch to a new regularization weight, reusing the mass factorizations."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)
        self._build_y_block()
        return self

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    def block_matrix(self, name: str) -> sp.csr_matrix:
        """The scaled sparse matrix of one diagonal block."""
        a = self.alpha
        if name == "y":
            return self._p_y
        if name == "u":
            return (a * self.blocks.u_mass).tocsr()
        if name == "p_u":
            return (self.blocks.u_mass / a).tocsr()
        if name == "p_r1":
            return self.blocks.r1_gram
        if name == "p_r2" and self.spec.is_wave:
            return self.blocks.r2_mass
        raise KeyError(name)

    def materialize(self) -> sp.csr_matrix:
        """The full block-diagonal matrix (verification and export use)."""
        return sp.block_diag([self.block_matrix(n) for n in self.block_names],
                             format="csr")

    def apply_inverse(self, r: np.ndarray) -> np.ndarray:
        """Per-block solve; Kronecker blocks go through univariate sweeps."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.dim,):
            raise ValueError(f"residual has shape {r.shape}, expected ({self.dim},)")
        o = self._offsets
        out = np.empty_like(r)
        out[o[0]:o[1]] = self._y_lu.solve(r[o[0]:o[1]])
        out[o[1]:o[2]] = self._u_solver.solve(r[o[1]:o[2]]) / self.alpha
        out[o[2]:o[3]] = self._u_solver.solve(r[o[2]:o[3]]) * self.alpha
        out[o[3]:o[4]] = self._r1_lu.solve(r[o[3]:o[4]])
        if self.spec.is_wave:
            out[o[4]:o[5]] = self._r2_solver.solve(r[o[4]:o[5]])
        return out


def build_preconditioner(spec: ProblemSpec, spaces: DiscreteSpaces,
                         blocks: SystemBlocks,
                         alpha: float | None = None) -> BlockDiagPreconditioner:
    """Assemble and factorize all diagonal blocks."""
    return BlockDiagPreconditioner(spec, spaces, blocks, alpha=alpha)


PTILDE_DIM_CAP = 200


def build_Ptilde_Y(spec: ProblemSpec, spaces: DiscreteSpaces,
                   blocks: SystemBlocks, alpha: float | None = None,
                   dim_cap: int = PTILDE_DIM_CAP) -> np.ndarray:
    """Dense operator-preconditioning reference for the state block.

    observation + alpha K_U' M_U^{-1} K_U + K_R1' S^{-1} K_R1
    [+ K_R2' M_R2^{-1} K_R2]. Dense by construction, so it is refused beyond
    the configured state-space dimension cap; alpha = 0 is allowed here to
    inspect the term dropout.
    """
    if spaces.dim_y > dim_cap:
        raise ValueError(
            f"state dimension {spaces.dim_y} exceeds the dense reference cap {dim_cap}")
    a = spec.alpha if alpha is None else float(alpha)
    if a < 0:
        raise ValueError("alpha must be nonnegative")
    out = blocks.observation.toarray()
    k_u = blocks.k_u.toarray()
    out += a * (k_u.T @ KroneckerSolver(_u_mass_factors(spaces)).solve(k_u))
    k_r1 = blocks.k_r1.toarray()
    out += k_r1.T @ splu(blocks.r1_gram.tocsc()).solve(k_r1)
    if spec.is_wave:
        k_r2 = blocks.k_r2.toarray()
        out += k_r2.T @ KroneckerSolver(_r2_mass_factors(spaces)).solve(k_r2)
    return out
