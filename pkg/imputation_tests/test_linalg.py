import logging

import numpy as np
import pytest
import scipy.linalg
from scipy import sparse

from manifold_imputation import _linalg
from manifold_imputation._linalg import (
    LeastSquaresProblem,
    infinity_norm_inverse,
    lsq_solve,
    normal_equations_solve,
)
from manifold_imputation.exceptions import SingularMatrixError


class TestLeastSquaresProblem:
    def test_rhs_length_mismatch(self):
        with pytest.raises(ValueError, match="Right-hand side"):
            LeastSquaresProblem(np.eye(3), np.zeros(2))

    def test_non_finite_input(self):
        matrix = np.eye(2)
        matrix[0, 1] = np.inf
        with pytest.raises(ValueError, match="finite"):
            LeastSquaresProblem(matrix, np.zeros(2))

    def test_empty_matrix(self):
        with pytest.raises(ValueError, match="non-empty"):
            LeastSquaresProblem(np.zeros((0, 2)), np.zeros(0))


class TestLsqSolve:
    def test_full_rank_square(self, rng):
        matrix = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        rhs = rng.normal(size=6)

        result = lsq_solve(LeastSquaresProblem(matrix, rhs))

        np.testing.assert_allclose(result.solution, np.linalg.solve(matrix, rhs), atol=1e-12)
        assert result.rank == 6
        assert not result.rank_deficient
        assert result.cond == pytest.approx(np.linalg.cond(matrix), rel=1e-8)
        assert result.residual_norm < 1e-10

    def test_overdetermined_matches_lstsq(self, rng):
        matrix = rng.normal(size=(20, 4))
        rhs = rng.normal(size=20)
        result = lsq_solve(LeastSquaresProblem(matrix, rhs))
        expected = np.linalg.lstsq(matrix, rhs, rcond=None)[0]
        np.testing.assert_allclose(result.solution, expected, atol=1e-12)

    def test_rank_deficient_gives_minimum_norm(self):
        matrix = np.array([[1.0, 1.0], [1.0, 1.0]])
        result = lsq_solve(LeastSquaresProblem(matrix, np.array([2.0, 2.0])))
        assert result.rank == 1
        assert result.rank_deficient
        np.testing.assert_allclose(result.solution, [1.0, 1.0])

    def test_zero_matrix(self, caplog):
        with caplog.at_level(logging.WARNING):
            result = lsq_solve(LeastSquaresProblem(np.zeros((3, 2)), np.ones(3)))
        assert result.is_zero_matrix
        assert result.cond == float("inf")
        np.testing.assert_array_equal(result.solution, [0.0, 0.0])
        assert "numerically zero" in caplog.text

    def test_sparse_small_system_is_densified(self, rng):
        dense = rng.normal(size=(10, 3))
        rhs = rng.normal(size=10)
        from_sparse = lsq_solve(LeastSquaresProblem(sparse.csr_matrix(dense), rhs))
        from_dense = lsq_solve(LeastSquaresProblem(dense, rhs))
        np.testing.assert_allclose(from_sparse.solution, from_dense.solution)
        assert from_sparse.cond == pytest.approx(from_dense.cond)

    def test_multiple_right_hand_sides(self, rng):
        matrix = rng.normal(size=(8, 3))
        rhs = rng.normal(size=(8, 2))
        result = lsq_solve(LeastSquaresProblem(matrix, rhs))
        assert result.solution.shape == (3, 2)
        np.testing.assert_allclose(
            result.solution[:, 1], np.linalg.lstsq(matrix, rhs[:, 1], rcond=None)[0]
        )


class TestOracles:
    def test_normal_equations_agree_with_svd(self, rng):
        matrix = rng.normal(size=(15, 5))
        rhs = rng.normal(size=15)
        np.testing.assert_allclose(
            normal_equations_solve(sparse.csr_matrix(matrix), rhs),
            lsq_solve(LeastSquaresProblem(matrix, rhs)).solution,
            atol=1e-10,
        )

    def test_infinity_norm_inverse(self):
        assert infinity_norm_inverse(np.array([[2.0, 0.0], [0.0, 4.0]])) == pytest.approx(0.5)
        assert infinity_norm_inverse(np.array([[2.0]])) == pytest.approx(0.5)

    def test_infinity_norm_inverse_singular(self):
        with pytest.raises(SingularMatrixError):
            infinity_norm_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_infinity_norm_inverse_not_square(self):
        with pytest.raises(ValueError, match="square"):
            infinity_norm_inverse(np.ones((2, 3)))


def _with_singular_values(rng, rows, s):
    left = np.linalg.qr(rng.normal(size=(rows, len(s))))[0]
    right = np.linalg.qr(rng.normal(size=(len(s), len(s))))[0]
    return (left * np.asarray(s)) @ right.T


class TestLsqInvariants:
    def test_minimum_norm_for_random_right_hand_sides(self, rng):
        matrix = rng.normal(size=(12, 5)) @ rng.normal(size=(5, 8))
        null = scipy.linalg.null_space(matrix)
        for _ in range(100):
            rhs = rng.normal(size=12)
            result = lsq_solve(LeastSquaresProblem(matrix, rhs, rank_tolerance=1e-10))
            assert result.rank == 5
            np.testing.assert_allclose(null.T @ result.solution, 0.0, atol=1e-10)
            shifted = result.solution + null @ rng.normal(scale=0.1, size=null.shape[1])
            assert np.linalg.norm(shifted) > np.linalg.norm(result.solution)

    def test_normal_equation_residual(self, rng):
        for _ in range(10):
            matrix = rng.normal(size=(30, 10))
            rhs = rng.normal(size=30)
            x = lsq_solve(LeastSquaresProblem(matrix, rhs)).solution
            gradient = matrix.T @ (matrix @ x) - matrix.T @ rhs
            assert np.linalg.norm(gradient) <= 1e-8 * np.linalg.norm(matrix.T @ rhs)


class TestSparsePath:
    @pytest.fixture(autouse=True)
    def _narrow_dense_limit(self, monkeypatch):
        monkeypatch.setattr(_linalg, "DENSE_COLUMN_LIMIT", 10)

    def test_full_rank(self, rng):
        matrix = rng.normal(size=(40, 20))
        rhs = rng.normal(size=40)
        result = lsq_solve(LeastSquaresProblem(sparse.csr_matrix(matrix), rhs))
        assert result.rank == 20
        assert not result.rank_estimated
        assert result.cond == pytest.approx(np.linalg.cond(matrix), rel=1e-6)
        np.testing.assert_allclose(
            result.solution, np.linalg.lstsq(matrix, rhs, rcond=None)[0], atol=1e-8
        )

    def test_counts_every_small_singular_value(self, rng):
        s = np.concatenate([[1e-6, 2e-6], np.linspace(1.0, 3.0, 18)])
        matrix = _with_singular_values(rng, 40, s)
        problem = LeastSquaresProblem(sparse.csr_matrix(matrix), rng.normal(size=40), 1e-4)
        result = lsq_solve(problem)
        assert result.rank == 18
        assert result.rank_deficient
        assert not result.rank_estimated
        assert result.cond == pytest.approx(3.0, rel=1e-6)

    def test_deficiency_wider_than_window_is_flagged(self, rng, caplog):
        s = np.concatenate([1e-6 * np.arange(1, 8), np.linspace(1.0, 3.0, 13)])
        matrix = _with_singular_values(rng, 40, s)
        problem = LeastSquaresProblem(sparse.csr_matrix(matrix), rng.normal(size=40), 1e-4)
        with caplog.at_level(logging.WARNING):
            result = lsq_solve(problem)
        assert result.rank_estimated
        assert result.rank == 20 - _linalg.SPARSE_RANK_WINDOW
        assert result.cond == float("inf")
        assert "upper estimate" in caplog.text
