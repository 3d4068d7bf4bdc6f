"""Sums of Kronecker products of small univariate matrices.

Space-time operators on tensor-product spline spaces are sums of terms
w * (T x X x Y) with dense univariate factors. This module materializes
such sums as sparse matrices and provides the fast inverse for a single
SPD tensor-product operator through per-factor Cholesky solves.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve


@dataclass
class KroneckerTerm:
    weight: float
    factors: tuple


class KroneckerMatrix:
    """A sum of weighted Kronecker products with conforming factor shapes."""

    def __init__(self):
        self.terms: list[KroneckerTerm] = []

    def add(self, weight: float, *factors) -> "KroneckerMatrix":
        factors = tuple(np.asarray(f) for f in factors)
        if self.terms:
            ref = self.terms[0].factors
            if len(ref) != len(factors) or any(
                f.shape != g.shape for f, g in zip(factors, ref)
            ):
                raise ValueError("term factor shapes do not conform")
        self.terms.append(KroneckerTerm(float(weight), factors))
        return self

    @property
    def row_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.terms[0].factors)

    @property
    def col_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.terms[0].factors)

    @property
    def shape(self) -> tuple[int, int]:
        return int(np.prod(self.row_dims)), int(np.prod(self.col_dims))

    def materialize(self) -> sp.csr_matrix:
        """Assemble the sum into one sparse CSR matrix."""
        if not self.terms:
            raise ValueError("empty Kronecker sum")
        total = None
        for term in self.terms:
            prod = sp.csr_matrix(term.factors[0])
            for f in term.factors[1:]:
                prod = sp.kron(prod, sp.csr_matrix(f), format="csr")
            prod = term.weight * prod
            total = prod if total is None else total + prod
        total.eliminate_zeros()
        return total.tocsr()


def kron_materialize(*factors) -> sp.csr_matrix:
    """Sparse Kronecker product of the given factors."""
    km = KroneckerMatrix()
    km.add(1.0, *factors)
    return km.materialize()


class KroneckerSolver:
    """Inverse of a single SPD tensor-product operator A_1 x ... x A_m.

    Each factor is Cholesky-factorized once; a solve sweeps the factor
    inverses along the corresponding tensor modes.
    """

    def __init__(self, factors):
        self.dims = tuple(np.asarray(f).shape[0] for f in factors)
        for f in factors:
            f = np.asarray(f)
            if f.shape[0] != f.shape[1]:
                raise ValueError("factors must be square")
        self._chol = [cho_factor(np.asarray(f)) for f in factors]

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def solve(self, r: np.ndarray) -> np.ndarray:
        """Solve (A_1 x ... x A_m) x = r; r may carry extra trailing columns."""
        r = np.asarray(r)
        extra = r.shape[1:] if r.ndim > 1 else ()
        X = r.reshape(self.dims + extra)
        for axis, cf in enumerate(self._chol):
            X = np.moveaxis(X, axis, 0)
            lead = X.shape[0]
            X = cho_solve(cf, X.reshape(lead, -1)).reshape(X.shape)
            X = np.moveaxis(X, 0, axis)
        return X.reshape((self.dim,) + extra)
