"""Univariate spline spaces on uniform dyadic knot vectors.

Provides the spaces, basis/derivative evaluation, per-element Gauss
quadrature and the Galerkin matrices (mass, stiffness, derivative
couplings, possibly clipped to a sub-interval) from which all space-time
operators are assembled as Kronecker products.
"""

from dataclasses import dataclass, field

import numpy as np


def dimension(degree: int, level: int, continuity: int) -> int:
    """Dimension of the spline space: (p+1) + (2^level - 1)(p - k)."""
    return (degree + 1) + (2**level - 1) * (degree - continuity)


def _span_index(knots: np.ndarray, degree: int, x: float) -> int:
    """Index i with knots[i] <= x < knots[i+1], right-continuous.

    At the right boundary the last nonempty span is used, which realizes the
    left-sided limit there.
    """
    n = len(knots) - degree - 1
    if x >= knots[n]:
        i = n - 1
        while knots[i + 1] <= knots[i]:
            i -= 1
        return i
    return int(np.searchsorted(knots, x, side="right") - 1)


def _ders_basis(knots: np.ndarray, degree: int, span: int, x: float,
                d_max: int) -> np.ndarray:
    """Derivatives 0..d_max of the degree+1 basis functions active on a span.

    Standard triangular-table recurrence; vanishing knot differences (repeated
    knots) contribute zero terms, which keeps full-multiplicity interior knots
    (discontinuous splines) well defined.
    """
    p = degree
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            den = right[r + 1] + left[j - r]
            ndu[j, r] = den
            temp = 0.0 if den == 0.0 else ndu[r, j - 1] / den
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((d_max + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, d_max + 1):
            dval = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                den = ndu[pk + 1, rk]
                a[s2, 0] = 0.0 if den == 0.0 else a[s1, 0] / den
                dval = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                den = ndu[pk + 1, rk + j]
                a[s2, j] = 0.0 if den == 0.0 else (a[s1, j] - a[s1, j - 1]) / den
                dval += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                den = ndu[pk + 1, r]
                a[s2, k] = 0.0 if den == 0.0 else -a[s1, k - 1] / den
                dval += a[s2, k] * ndu[r, pk]
            ders[k, r] = dval
            s1, s2 = s2, s1
    fac = 1.0
    for k in range(1, d_max + 1):
        fac *= p - k + 1
        ders[k] *= fac
    return ders


@dataclass
class SplineSpace:
    """Splines of a given degree on 2^level uniform elements of (a, b).

    Interior knots have multiplicity degree - continuity, boundary knots
    multiplicity degree + 1 (open knot vector). ``continuity = degree - 1``
    is the maximal-smoothness space; ``continuity = -1`` is discontinuous.
    Instances are immutable after construction.
    """

    degree: int
    level: int
    continuity: int
    a: float
    b: float
    knots: np.ndarray = field(init=False, repr=False)
    dim: int = field(init=False)

    def __post_init__(self):
        p, k = self.degree, self.continuity
        if p < 0 or self.level < 0:
            raise ValueError("degree and level must be nonnegative")
        if not (-1 <= k <= p - 1):
            raise ValueError(f"continuity must be in [-1, {p - 1}], got {k}")
        if not self.a < self.b:
            raise ValueError("empty interval")
        nel = 2**self.level
        h = (self.b - self.a) / nel
        interior = np.repeat(self.a + h * np.arange(1, nel), p - k)
        self.knots = np.concatenate(
            [np.full(p + 1, self.a), interior, np.full(p + 1, self.b)]
        )
        self.dim = len(self.knots) - p - 1
        assert self.dim == dimension(p, self.level, k)

    @property
    def n_elements(self) -> int:
        return 2**self.level

    @property
    def mesh(self) -> float:
        return (self.b - self.a) / self.n_elements

    def element_edges(self) -> np.ndarray:
        return self.a + self.mesh * np.arange(self.n_elements + 1)

    def same_mesh(self, other: "SplineSpace") -> bool:
        return (
            self.a == other.a and self.b == other.b and self.level == other.level
        )


def make_space(degree: int, level: int, continuity: int, a: float = 0.0,
               b: float = 1.0) -> SplineSpace:
    """Build the spline space of the given degree/level/interior continuity."""
    return SplineSpace(degree, level, continuity, a, b)


def eval_basis_many(space: SplineSpace, x: np.ndarray, d: int = 0) -> np.ndarray:
    """Values of the d-th derivative of all basis functions, shape (len(x), dim).

    Values at interior knots are one-sided limits from the right; at x = b
    the limit is taken from the left.
    """
    if d < 0 or d > space.degree:
        raise ValueError(f"derivative order must be in [0, {space.degree}]")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size and (x.min() < space.a or x.max() > space.b):
        raise ValueError("evaluation point outside the interval")
    p = space.degree
    out = np.zeros((len(x), space.dim))
    for row, xi in enumerate(x):
        span = _span_index(space.knots, p, float(xi))
        ders = _ders_basis(space.knots, p, span, float(xi), d)
        out[row, span - p:span + 1] = ders[d]
    return out


def eval_basis(space: SplineSpace, x: float, d: int = 0) -> np.ndarray:
    """Dense vector of d-th derivative basis values at a single point."""
    return eval_basis_many(space, [x], d)[0]


def endpoint_row(space: SplineSpace, endpoint: str, d: int = 0) -> np.ndarray:
    """Row of d-th derivative basis values at endpoint 'a' or 'b'."""
    if endpoint not in ("a", "b"):
        raise ValueError("endpoint must be 'a' or 'b'")
    x = space.a if endpoint == "a" else space.b
    return eval_basis(space, x, d)


def h10_restriction(space: SplineSpace) -> np.ndarray:
    """Indices of basis functions vanishing at both endpoints.

    With an open knot vector only the first and last basis functions have a
    nonzero endpoint value, so the restricted set is everything in between.
    """
    if space.continuity < 0:
        raise ValueError("trace has no meaning for discontinuous splines")
    return np.arange(1, space.dim - 1)


@dataclass
class QuadratureRule:
    """Per-element Gauss-Legendre rule, optionally clipped to a sub-interval.

    points/weights have shape (n_elements, n_points); elements whose
    intersection with the clip interval is empty carry zero weights.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1)

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.reshape(-1)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.flat_weights @ np.asarray(values).reshape(-1))


def gauss_rule(space: SplineSpace, n_points: int | None = None,
               sub: tuple[float, float] | None = None) -> QuadratureRule:
    """Gauss rule with n_points per element (default degree+1).

    degree+1 points integrate products of two basis functions exactly
    (piecewise polynomial of degree <= 2*degree).
    """
    if n_points is None:
        n_points = space.degree + 1
    q, w = np.polynomial.legendre.leggauss(n_points)
    edges = space.element_edges()
    pts = np.zeros((space.n_elements, n_points))
    wts = np.zeros((space.n_elements, n_points))
    for e in range(space.n_elements):
        x0, x1 = edges[e], edges[e + 1]
        if sub is not None:
            x0, x1 = max(x0, sub[0]), min(x1, sub[1])
            if x1 <= x0:
                pts[e] = edges[e]  # inert points, zero weight
                continue
        pts[e] = 0.5 * (x1 - x0) * q + 0.5 * (x0 + x1)
        wts[e] = 0.5 * (x1 - x0) * w
    return QuadratureRule(pts, wts)


@dataclass
class UnivariateMatrix:
    """Galerkin matrix between two spline spaces on the same mesh.

    entries[i, j] = integral of D^{d_row} (row basis)_i * D^{d_col} (col basis)_j
    over the (possibly clipped) interval.
    """

    row_space: SplineSpace
    col_space: SplineSpace
    d_row: int
    d_col: int
    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


def univariate_matrix(row_space: SplineSpace, col_space: SplineSpace,
                      d_row: int = 0, d_col: int = 0,
                      sub: tuple[float, float] | None = None) -> UnivariateMatrix:
    """Assemble the derivative-coupling matrix by per-element Gauss quadrature.

    Both spaces must share the interval and element partition. The rule uses
    max(degree) + 1 points per element, exact for the piecewise-polynomial
    integrand. Element contributions are accumulated in a fixed order, so
    assembly is bit-reproducible.
    """
    if not row_space.same_mesh(col_space):
        raise ValueError("row and column spaces must share interval and mesh")
    n = max(row_space.degree, col_space.degree) + 1
    rule = gauss_rule(row_space, n_points=n, sub=sub)
    A = np.zeros((row_space.dim, col_space.dim))
    for e in range(row_space.n_elements):
        w = rule.weights[e]
        if not np.any(w):
            continue
        er = eval_basis_many(row_space, rule.points[e], d_row)
        ec = eval_basis_many(col_space, rule.points[e], d_col)
        A += er.T @ (w[:, None] * ec)
    if row_space is col_space and d_row == d_col:
        A = 0.5 * (A + A.T)  # bitwise symmetry, independent of BLAS ordering
    return UnivariateMatrix(row_space, col_space, d_row, d_col, A)


def univariate_matrix_clipped(row_space: SplineSpace, col_space: SplineSpace,
                              d_row: int, d_col: int,
                              sub: tuple[float, float]) -> UnivariateMatrix:
    """Same as univariate_matrix, integrated over element intersections with sub.

    An empty intersection yields a zero matrix, not an error.
    """
    lo = max(sub[0], row_space.a)
    hi = min(sub[1], row_space.b)
    if hi <= lo:
        A = np.zeros((row_space.dim, col_space.dim))
        return UnivariateMatrix(row_space, col_space, d_row, d_col, A)
    return univariate_matrix(row_space, col_space, d_row, d_col, sub=(lo, hi))
