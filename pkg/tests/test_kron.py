"""Kronecker sums: materialization against dense products, tensor solves."""

import numpy as np
import pytest
import scipy.sparse as sp

from saddleprec.kron import KroneckerMatrix, KroneckerSolver, kron_materialize


def _rand_spd(rng, n):
    g = rng.standard_normal((n, n))
    return g.T @ g + n * np.eye(n)


def test_materialize_matches_dense_kron():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((2, 5))
    c = rng.standard_normal((4, 2))
    km = KroneckerMatrix()
    km.add(2.0, a, b, c)
    km.add(-0.5, a, b, c)
    dense = 1.5 * np.kron(np.kron(a, b), c)
    assert np.allclose(km.materialize().toarray(), dense, atol=1e-14)
    assert km.shape == (3 * 2 * 4, 4 * 5 * 2)


def test_nonconforming_terms_rejected():
    km = KroneckerMatrix()
    km.add(1.0, np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        km.add(1.0, np.eye(2), np.eye(4))
    with pytest.raises(ValueError):
        km.add(1.0, np.eye(2), np.eye(3), np.eye(2))


def test_kron_materialize_helper():
    a = np.diag([1.0, 2.0])
    b = np.diag([3.0, 4.0])
    out = kron_materialize(a, b)
    assert sp.issparse(out)
    assert np.allclose(out.toarray(), np.kron(a, b))


@pytest.mark.parametrize("dims", [(4, 3), (3, 4, 5)])
def test_solver_matches_dense_solve(dims):
    rng = np.random.default_rng(1)
    factors = [_rand_spd(rng, n) for n in dims]
    solver = KroneckerSolver(factors)
    dense = factors[0]
    for f in factors[1:]:
        dense = np.kron(dense, f)
    r = rng.standard_normal(dense.shape[0])
    assert np.allclose(solver.solve(r), np.linalg.solve(dense, r), rtol=1e-10)


def test_solver_multiple_right_hand_sides():
    rng = np.random.default_rng(2)
    factors = [_rand_spd(rng, 3), _rand_spd(rng, 4)]
    solver = KroneckerSolver(factors)
    dense = np.kron(factors[0], factors[1])
    r = rng.standard_normal((12, 7))
    assert np.allclose(solver.solve(r), np.linalg.solve(dense, r), rtol=1e-10)


def test_solver_rejects_rectangular_factor():
    with pytest.raises(ValueError):
        KroneckerSolver([np.ones((2, 3))])
