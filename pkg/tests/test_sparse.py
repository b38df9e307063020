"""Sparse/dense kernel tests against dense numpy oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsim.errors import DimensionMismatchError, NotPositiveDefiniteError
from condsim.sparse import (
    SparseSymmetric,
    factor_spd,
    row_norms_sq,
    solve_with,
    spmv,
)
from condsim.testing import random_spd


def dense(vals) -> SparseSymmetric:
    return SparseSymmetric.from_dense(np.array(vals, dtype=float))


class TestSpmv:
    def test_identity(self):
        a = SparseSymmetric.identity(3)
        x = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(spmv(a, x), x)

    def test_hand_2x2(self):
        a = dense([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(spmv(a, np.ones(2)), [3.0, 3.0])

    def test_random_vs_dense_oracle(self, rng):
        a = random_spd(rng, 50, density=0.1)
        x = rng.standard_normal(50)
        assert np.allclose(spmv(a, x), a.to_dense() @ x, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            spmv(SparseSymmetric.identity(3), np.zeros(4))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=2, max_value=25), st.integers(min_value=0, max_value=2**31 - 1))
    def test_symmetry_bilinear(self, n, seed):
        # x^T A y == y^T A x for symmetric A
        g = np.random.default_rng(seed)
        a = random_spd(g, n)
        x, y = g.standard_normal(n), g.standard_normal(n)
        lhs = spmv(a, x) @ y
        rhs = spmv(a, y) @ x
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


class TestFactorSolve:
    def test_scaled_identity(self):
        f = factor_spd(dense(4.0 * np.eye(2)))
        assert np.allclose(np.diag(f.lower), [2.0, 2.0])
        assert np.allclose(solve_with(f, np.array([4.0, 8.0])), [1.0, 2.0])

    def test_hand_2x2(self):
        f = factor_spd(dense([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(solve_with(f, np.array([3.0, 3.0])), [1.0, 1.0])

    def test_identity_unit_vector(self):
        f = factor_spd(SparseSymmetric.identity(4))
        e = np.array([1.0, 0.0, 0.0, 0.0])
        assert np.allclose(solve_with(f, e), e)

    def test_diagonal(self):
        f = factor_spd(dense(np.diag([2.0, 4.0])))
        assert np.allclose(solve_with(f, np.array([2.0, 4.0])), [1.0, 1.0])

    def test_random_vs_dense_oracle(self, rng):
        a = random_spd(rng, 30)
        b = rng.standard_normal(30)
        x = solve_with(factor_spd(a), b)
        x_ref = np.linalg.solve(a.to_dense(), b)
        assert np.linalg.norm(x - x_ref) <= 1e-9 * np.linalg.norm(x_ref)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            factor_spd(dense([[1.0, 2.0], [2.0, 1.0]]))

    def test_solve_roundtrip(self, rng):
        a = random_spd(rng, 20)
        x = rng.standard_normal(20)
        got = solve_with(factor_spd(a), spmv(a, x))
        assert np.linalg.norm(got - x) <= 1e-8 * np.linalg.norm(x)

    def test_multiple_rhs(self, rng):
        a = random_spd(rng, 12)
        b = rng.standard_normal((12, 4))
        x = solve_with(factor_spd(a), b)
        assert np.allclose(a.to_dense() @ x, b, atol=1e-9)


class TestRowNorms:
    def test_identity(self):
        assert np.allclose(row_norms_sq(SparseSymmetric.identity(3)), np.ones(3))

    def test_hand_2x2(self):
        assert np.allclose(row_norms_sq(dense([[2.0, 1.0], [1.0, 2.0]])), [5.0, 5.0])

    def test_random_vs_dense_oracle(self, rng):
        a = random_spd(rng, 40, density=0.2)
        ref = (a.to_dense() ** 2).sum(axis=1)
        assert np.allclose(row_norms_sq(a), ref, atol=1e-12 * max(1.0, ref.max()))


class TestSymmetryValidation:
    def test_check_symmetry_passes(self, rng):
        random_spd(rng, 10).check_symmetry()

    def test_from_dense_rejects_asymmetric(self):
        from condsim.errors import InvalidMatrixError

        with pytest.raises(InvalidMatrixError):
            SparseSymmetric.from_dense(np.array([[1.0, 2.0], [0.0, 1.0]]))
