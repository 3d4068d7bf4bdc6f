"""Kronecker assembly of the discrete heat/wave optimal-control optimality systems.

The state space is a tensor product of a temporal spline factor and two
H^1_0-restricted spatial spline factors; the control/test space uses three
reduced-continuity factors so that the state residual is exactly
representable in it. All blocks are sums of Kronecker products of univariate
matrices, materialized as sparse matrices, and the assembled system is
symmetric by construction (transposed blocks are placed explicitly).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .kron import KroneckerMatrix, KroneckerSolver, kron_materialize
from .splines import (
    SplineSpace,
    dimension,
    endpoint_row,
    eval_basis_many,
    gauss_rule,
    h10_restriction,
    make_space,
    univariate_matrix,
    univariate_matrix_clipped,
)

HEAT = "heat"
WAVE = "wave"


@dataclass
class ProblemSpec:
    """Configuration of one optimal-control discretization.

    The PDE lives on the unit square over (0, final_time); observation is
    restricted to the axis-aligned box omega. ``u_continuity`` overrides the
    default degree-3 continuity drop of the control space (used only to
    study what breaks when the residual space is too small).
    """

    kind: str
    degree: int
    level: int
    alpha: float
    final_time: float = 1.0
    omega: tuple = ((0.25, 0.75), (0.25, 0.75))
    seed: int = 0
    u_continuity: int | None = None

    def __post_init__(self):
        if self.kind not in (HEAT, WAVE):
            raise ValueError(f"kind must be '{HEAT}' or '{WAVE}'")
        if self.degree < 2:
            raise ValueError("degree must be at least 2 (the state Laplacian "
                             "must be square integrable)")
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.final_time <= 0:
            raise ValueError("final_time must be positive")
        (x0, x1), (y0, y1) = self.omega
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError("omega must be a box inside the unit square")

    @property
    def is_wave(self) -> bool:
        return self.kind == WAVE


@dataclass
class DiscreteSpaces:
    """Univariate factors of the discrete spaces plus the interior index sets."""

    y_time: SplineSpace
    y_x: SplineSpace
    y_y: SplineSpace
    u_time: SplineSpace
    u_x: SplineSpace
    u_y: SplineSpace
    ix: np.ndarray
    iy: np.ndarray
    has_r2: bool

    @property
    def dim_y(self) -> int:
        return self.y_time.dim * len(self.ix) * len(self.iy)

    @property
    def dim_u(self) -> int:
        return self.u_time.dim * self.u_x.dim * self.u_y.dim

    @property
    def dim_r1(self) -> int:
        return len(self.ix) * len(self.iy)

    @property
    def dim_r2(self) -> int:
        return self.y_x.dim * self.y_y.dim if self.has_r2 else 0

    @property
    def y_shape(self):
        return (self.y_time.dim, len(self.ix), len(self.iy))

    @property
    def u_shape(self):
        return (self.u_time.dim, self.u_x.dim, self.u_y.dim)


def build_spaces(spec: ProblemSpec) -> DiscreteSpaces:
    """State factors at maximal continuity, control factors at continuity p-3.

    The continuity drop makes the control space contain the image of the
    state space under the differential operator, which is what keeps the
    sparse preconditioner block equal to its dense reference.
    """
    p, lev, T = spec.degree, spec.level, spec.final_time
    ku = p - 3 if spec.u_continuity is None else spec.u_continuity
    y_time = make_space(p, lev, p - 1, 0.0, T)
    y_x = make_space(p, lev, p - 1, 0.0, 1.0)
    y_y = make_space(p, lev, p - 1, 0.0, 1.0)
    u_time = make_space(p, lev, ku, 0.0, T)
    u_x = make_space(p, lev, ku, 0.0, 1.0)
    u_y = make_space(p, lev, ku, 0.0, 1.0)
    return DiscreteSpaces(
        y_time, y_x, y_y, u_time, u_x, u_y,
        h10_restriction(y_x), h10_restriction(y_y),
        has_r2=spec.is_wave,
    )


def dof_count(spec: ProblemSpec) -> int:
    """Total unknowns of the optimality system: dim Y + 2 dim U + dim R1 (+ dim R2)."""
    p, lev = spec.degree, spec.level
    ku = p - 3 if spec.u_continuity is None else spec.u_continuity
    n_max = dimension(p, lev, p - 1)
    n_int = n_max - 2
    n_u = dimension(p, lev, ku)
    total = n_max * n_int**2 + 2 * n_u**3 + n_int**2
    if spec.is_wave:
        total += n_max**2
    return total


def _restrict(mat: np.ndarray, rows=None, cols=None) -> np.ndarray:
    out = mat
    if rows is not None:
        out = out[rows, :]
    if cols is not None:
        out = out[:, cols]
    return out


def assemble_observation(spec: ProblemSpec, spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Mass matrix of the state space over the observed sub-cylinder omega x (0, T)."""
    (wx, wy) = spec.omega
    mt = univariate_matrix(spaces.y_time, spaces.y_time, 0, 0).entries
    mx = univariate_matrix_clipped(spaces.y_x, spaces.y_x, 0, 0, wx).entries
    my = univariate_matrix_clipped(spaces.y_y, spaces.y_y, 0, 0, wy).entries
    mx = _restrict(mx, spaces.ix, spaces.ix)
    my = _restrict(my, spaces.iy, spaces.iy)
    return kron_materialize(mt, mx, my)


def assemble_u_mass(spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Mass matrix of the control space over the full cylinder."""
    mt = univariate_matrix(spaces.u_time, spaces.u_time, 0, 0).entries
    mx = univariate_matrix(spaces.u_x, spaces.u_x, 0, 0).entries
    my = univariate_matrix(spaces.u_y, spaces.u_y, 0, 0).entries
    return kron_materialize(mt, mx, my)


def assemble_K_U(spec: ProblemSpec, spaces: DiscreteSpaces) -> sp.csr_matrix:
    """State-residual pairing: rows test the control space, columns the state space.

    Wave: (d_tt y - Lap y, sigma); heat: (d_t y - Lap y, sigma). The time
    factor of the leading term couples the test functions against the first
    or second time derivative of the state basis.
    """
    dt = 2 if spec.is_wave else 1
    t_deriv = univariate_matrix(spaces.u_time, spaces.y_time, 0, dt).entries
    t_mass = univariate_matrix(spaces.u_time, spaces.y_time, 0, 0).entries
    x_d2 = _restrict(
        univariate_matrix(spaces.u_x, spaces.y_x, 0, 2).entries, cols=spaces.ix)
    x_mass = _restrict(
        univariate_matrix(spaces.u_x, spaces.y_x, 0, 0).entries, cols=spaces.ix)
    y_d2 = _restrict(
        univariate_matrix(spaces.u_y, spaces.y_y, 0, 2).entries, cols=spaces.iy)
    y_mass = _restrict(
        univariate_matrix(spaces.u_y, spaces.y_y, 0, 0).entries, cols=spaces.iy)
    km = KroneckerMatrix()
    km.add(1.0, t_deriv, x_mass, y_mass)
    km.add(-1.0, t_mass, x_d2, y_mass)
    km.add(-1.0, t_mass, x_mass, y_d2)
    return km.materialize()


def _spatial_stiffness_terms(spaces: DiscreteSpaces):
    """Restricted factors of the 2-D H^1_0 inner product Sx x My + Mx x Sy."""
    sx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 1, 1).entries,
                   spaces.ix, spaces.ix)
    sy = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 1, 1).entries,
                   spaces.iy, spaces.iy)
    mx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries,
                   spaces.ix, spaces.ix)
    my = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries,
                   spaces.iy, spaces.iy)
    return sx, sy, mx, my


def assemble_r1_gram(spaces: DiscreteSpaces) -> sp.csr_matrix:
    """2-D stiffness (H^1_0 Gram) on the restricted spatial space."""
    sx, sy, mx, my = _spatial_stiffness_terms(spaces)
    km = KroneckerMatrix()
    km.add(1.0, sx, my)
    km.add(1.0, mx, sy)
    return km.materialize()


def assemble_K_R1(spec: ProblemSpec, spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Initial-displacement pairing (grad y(0), grad r): endpoint row in time
    tensor the 2-D stiffness."""
    e0 = endpoint_row(spaces.y_time, "a", 0)[None, :]
    sx, sy, mx, my = _spatial_stiffness_terms(spaces)
    km = KroneckerMatrix()
    km.add(1.0, e0, sx, my)
    km.add(1.0, e0, mx, sy)
    return km.materialize()


def assemble_r2_mass(spaces: DiscreteSpaces) -> sp.csr_matrix:
    """2-D mass on the unrestricted spatial space (wave initial-velocity test space)."""
    mx = univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries
    my = univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries
    return kron_materialize(mx, my)


def assemble_K_R2(spec: ProblemSpec, spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Initial-velocity pairing (d_t y(0), r) against the unrestricted spatial space."""
    if not spec.is_wave:
        raise ValueError("the initial-velocity block exists only for the wave problem")
    e1 = endpoint_row(spaces.y_time, "a", 1)[None, :]
    mx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries,
                   cols=spaces.ix)
    my = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries,
                   cols=spaces.iy)
    return kron_materialize(e1, mx, my)


@dataclass
class SystemBlocks:
    """The sparse blocks of the optimality system, retained individually."""

    observation: sp.csr_matrix
    u_mass: sp.csr_matrix
    k_u: sp.csr_matrix
    k_r1: sp.csr_matrix
    r1_gram: sp.csr_matrix
    k_r2: sp.csr_matrix | None = None
    r2_mass: sp.csr_matrix | None = None


def assemble_blocks(spec: ProblemSpec, spaces: DiscreteSpaces) -> SystemBlocks:
    blocks = SystemBlocks(
        observation=assemble_observation(spec, spaces),
        u_mass=assemble_u_mass(spaces),
        k_u=assemble_K_U(spec, spaces),
        k_r1=assemble_K_R1(spec, spaces),
        r1_gram=assemble_r1_gram(spaces),
    )
    if spec.is_wave:
        blocks.k_r2 = assemble_K_R2(spec, spaces)
        blocks.r2_mass = assemble_r2_mass(spaces)
    return blocks


@dataclass
class ProblemData:
    """Data callbacks; None means homogeneous.

    d(t, x, y): observation target on the sub-cylinder; g_u(t, x, y): forcing
    tested against the control space; y0(x, y) with gradient y0_grad(x, y) ->
    (gx, gy): initial displacement; y1(x, y): initial velocity (wave only).
    Callbacks must broadcast over numpy grids.
    """

    d: object = None
    g_u: object = None
    y0: object = None
    y0_grad: object = None
    y1: object = None

    def is_homogeneous(self) -> bool:
        return all(f is None for f in (self.d, self.g_u, self.y0, self.y1))


@dataclass
class DiscreteSystem:
    """Assembled symmetric optimality system with named block layout."""

    spec: ProblemSpec
    spaces: DiscreteSpaces
    blocks: SystemBlocks
    matrix: sp.csr_matrix
    rhs: np.ndarray
    block_names: tuple
    block_dims: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_dims)])

    def block_slice(self, name: str) -> slice:
        i = self.block_names.index(name)
        offs = self.offsets()
        return slice(int(offs[i]), int(offs[i + 1]))


def _grid_moments_3d(f, rules, spaces3, restrictions, derivs=(0, 0, 0)):
    """Moments of f against a 3-D tensor basis on the given per-direction rules."""
    pts = [r.flat_points for r in rules]
    wts = [r.flat_weights for r in rules]
    evals = []
    for space, rule, restr, d in zip(spaces3, rules, restrictions, derivs):
        e = eval_basis_many(space, rule.flat_points, d)
        if restr is not None:
            e = e[:, restr]
        evals.append(e)
    vals = f(pts[0][:, None, None], pts[1][None, :, None], pts[2][None, None, :])
    vals = np.asarray(vals, dtype=float) * (
        wts[0][:, None, None] * wts[1][None, :, None] * wts[2][None, None, :])
    m = np.einsum("txy,ta,xb,yc->abc", vals, evals[0], evals[1], evals[2])
    return m.reshape(-1)


def _grid_moments_2d(f, rules, spaces2, restrictions, derivs=(0, 0)):
    pts = [r.flat_points for r in rules]
    wts = [r.flat_weights for r in rules]
    evals = []
    for space, rule, restr, d in zip(spaces2, rules, restrictions, derivs):
        e = eval_basis_many(space, rule.flat_points, d)
        if restr is not None:
            e = e[:, restr]
        evals.append(e)
    vals = np.asarray(f(pts[0][:, None], pts[1][None, :]), dtype=float)
    vals = vals * (wts[0][:, None] * wts[1][None, :])
    return np.einsum("xy,xa,yb->ab", vals, evals[0], evals[1]).reshape(-1)


def state_moments_qT(spec: ProblemSpec, spaces: DiscreteSpaces, f) -> np.ndarray:
    """(f, basis)_{L2(q_T)} over the observed sub-cylinder, for the rhs d-term."""
    (wx, wy) = spec.omega
    rules = [gauss_rule(spaces.y_time),
             gauss_rule(spaces.y_x, sub=wx),
             gauss_rule(spaces.y_y, sub=wy)]
    return _grid_moments_3d(f, rules, [spaces.y_time, spaces.y_x, spaces.y_y],
                            [None, spaces.ix, spaces.iy])


def control_moments(spaces: DiscreteSpaces, f) -> np.ndarray:
    """(f, basis)_{L2(Q_T)} against the control space."""
    rules = [gauss_rule(spaces.u_time), gauss_rule(spaces.u_x),
             gauss_rule(spaces.u_y)]
    return _grid_moments_3d(f, rules, [spaces.u_time, spaces.u_x, spaces.u_y],
                            [None, None, None])


def initial_displacement_moments(spaces: DiscreteSpaces, grad) -> np.ndarray:
    """(grad f, grad r) moments against the restricted 2-D space; grad returns (fx, fy)."""
    rules = [gauss_rule(spaces.y_x), gauss_rule(spaces.y_y)]
    ones = lambda x, y: np.ones_like(x * y)
    fx = lambda x, y: np.asarray(grad(x, y)[0], dtype=float) * ones(x, y)
    fy = lambda x, y: np.asarray(grad(x, y)[1], dtype=float) * ones(x, y)
    mx = _grid_moments_2d(fx, rules, [spaces.y_x, spaces.y_y],
                          [spaces.ix, spaces.iy], derivs=(1, 0))
    my = _grid_moments_2d(fy, rules, [spaces.y_x, spaces.y_y],
                          [spaces.ix, spaces.iy], derivs=(0, 1))
    return mx + my


def initial_velocity_moments(spaces: DiscreteSpaces, f) -> np.ndarray:
    """(f, r)_{L2} moments against the unrestricted 2-D space."""
    rules = [gauss_rule(spaces.y_x), gauss_rule(spaces.y_y)]
    return _grid_moments_2d(f, rules, [spaces.y_x, spaces.y_y], [None, None])


def assemble_system(spec: ProblemSpec, spaces: DiscreteSpaces | None = None,
                    data: ProblemData | None = None,
                    blocks: SystemBlocks | None = None) -> DiscreteSystem:
    """Assemble the symmetric saddle-point system and its right-hand side.

    Unknown order is (y, u, p_u, p_r1[, p_r2]). Transposed blocks are placed
    explicitly so the assembled matrix is symmetric exactly, not to rounding.
    Homogeneous data yield an exactly zero right-hand side.
    """
    if spaces is None:
        spaces = build_spaces(spec)
    if blocks is None:
        blocks = assemble_blocks(spec, spaces)
    if data is None:
        data = ProblemData()
    a = spec.alpha
    mu = blocks.u_mass
    if spec.is_wave:
        names = ("y", "u", "p_u", "p_r1", "p_r2")
        dims = (spaces.dim_y, spaces.dim_u, spaces.dim_u, spaces.dim_r1,
                spaces.dim_r2)
        mat = sp.bmat([
            [blocks.observation, None, blocks.k_u.T, blocks.k_r1.T, blocks.k_r2.T],
            [None, a * mu, mu, None, None],
            [blocks.k_u, mu, None, None, None],
            [blocks.k_r1, None, None, None, None],
            [blocks.k_r2, None, None, None, None],
        ], format="csr")
    else:
        names = ("y", "u", "p_u", "p_r1")
        dims = (spaces.dim_y, spaces.dim_u, spaces.dim_u, spaces.dim_r1)
        mat = sp.bmat([
            [blocks.observation, None, blocks.k_u.T, blocks.k_r1.T],
            [None, a * mu, mu, None],
            [blocks.k_u, mu, None, None],
            [blocks.k_r1, None, None, None],
        ], format="csr")

    rhs = np.zeros(mat.shape[0])
    offs = np.concatenate([[0], np.cumsum(dims)])
    if data.d is not None:
        rhs[offs[0]:offs[1]] = state_moments_qT(spec, spaces, data.d)
    if data.g_u is not None:
        rhs[offs[2]:offs[3]] = control_moments(spaces, data.g_u)
    if data.y0 is not None:
        if data.y0_grad is None:
            raise ValueError("initial displacement needs its gradient callback "
                             "for the H^1_0 pairing")
        rhs[offs[3]:offs[4]] = initial_displacement_moments(spaces, data.y0_grad)
    if data.y1 is not None:
        if not spec.is_wave:
            raise ValueError("initial velocity data only exists for the wave problem")
        rhs[offs[4]:offs[5]] = initial_velocity_moments(spaces, data.y1)
    return DiscreteSystem(spec, spaces, blocks, mat, rhs, names, dims)


def project_state_l2(spaces: DiscreteSpaces, f) -> np.ndarray:
    """L2(Q_T) projection of f onto the state space (coefficients)."""
    rules = [gauss_rule(spaces.y_time), gauss_rule(spaces.y_x),
             gauss_rule(spaces.y_y)]
    m = _grid_moments_3d(f, rules, [spaces.y_time, spaces.y_x, spaces.y_y],
                         [None, spaces.ix, spaces.iy])
    mt = univariate_matrix(spaces.y_time, spaces.y_time, 0, 0).entries
    mx = _restrict(univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries,
                   spaces.ix, spaces.ix)
    my = _restrict(univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries,
                   spaces.iy, spaces.iy)
    return KroneckerSolver([mt, mx, my]).solve(m)


def project_control_l2(spaces: DiscreteSpaces, f) -> np.ndarray:
    """L2(Q_T) projection of f onto the control space."""
    m = control_moments(spaces, f)
    mt = univariate_matrix(spaces.u_time, spaces.u_time, 0, 0).entries
    mx = univariate_matrix(spaces.u_x, spaces.u_x, 0, 0).entries
    my = univariate_matrix(spaces.u_y, spaces.u_y, 0, 0).entries
    return KroneckerSolver([mt, mx, my]).solve(m)


def project_initial_displacement(spaces: DiscreteSpaces, grad) -> np.ndarray:
    """H^1_0 projection onto the restricted 2-D space, from the gradient callback."""
    m = initial_displacement_moments(spaces, grad)
    gram = assemble_r1_gram(spaces).tocsc()
    return splu(gram).solve(m)


def project_initial_velocity(spaces: DiscreteSpaces, f) -> np.ndarray:
    """L2 projection onto the unrestricted 2-D space."""
    m = initial_velocity_moments(spaces, f)
    mx = univariate_matrix(spaces.y_x, spaces.y_x, 0, 0).entries
    my = univariate_matrix(spaces.y_y, spaces.y_y, 0, 0).entries
    return KroneckerSolver([mx, my]).solve(m)


def project_data(spaces: DiscreteSpaces, data: ProblemData) -> dict:
    """Coefficient vectors of all provided data functions, keyed by name."""
    out = {}
    if data.d is not None:
        out["d"] = project_state_l2(spaces, data.d)
    if data.g_u is not None:
        out["g_u"] = project_control_l2(spaces, data.g_u)
    if data.y0 is not None:
        if data.y0_grad is None:
            raise ValueError("initial displacement needs its gradient callback")
        out["y0"] = project_initial_displacement(spaces, data.y0_grad)
    if data.y1 is not None:
        out["y1"] = project_initial_velocity(spaces, data.y1)
    return out
