"""Least-squares machinery shared by the imputation back-ends.

Solves are SVD based so every solve also yields the numerical rank and the
2-norm condition number. Sparse matrices are densified up to
``DENSE_COLUMN_LIMIT`` columns; wider sparse systems go through LSQR, with rank
and condition number read off the largest and the ``SPARSE_RANK_WINDOW``
smallest singular values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import lsqr, svds

from ._types import FloatArray
from .exceptions import SingularMatrixError

LOGGER = logging.getLogger(__name__)

DEFAULT_RANK_TOLERANCE = 1e-12

# Widest sparse system solved through a dense SVD
DENSE_COLUMN_LIMIT = 4000

# Smallest singular values computed when counting the rank of an LSQR system
SPARSE_RANK_WINDOW = 6


@dataclass(frozen=True)
class LeastSquaresProblem:
    """min ||A x - b||_2 with rank decided at ``rank_tolerance * sigma_max``."""

    matrix: FloatArray | sparse.spmatrix
    rhs: FloatArray
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE

    def __post_init__(self) -> None:
        m, n = self.matrix.shape
        if m < 1 or n < 1:
            raise ValueError(f"Least-squares matrix must be non-empty, got shape {(m, n)}")
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.shape[0] != m:
            raise ValueError(f"Right-hand side has {rhs.shape[0]} rows, matrix has {m}")
        data = self.matrix.data if sparse.issparse(self.matrix) else self.matrix
        if not (np.all(np.isfinite(data)) and np.all(np.isfinite(rhs))):
            raise ValueError("Least-squares inputs must be finite")
        object.__setattr__(self, "rhs", rhs)


@dataclass(frozen=True)
class LeastSquaresResult:
    solution: FloatArray
    rank: int
    cond: float
    residual_norm: float
    singular_values: FloatArray
    # True when every computed singular value fell below tolerance, so the
    # deficiency may be larger than the one counted
    rank_estimated: bool = False

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.solution.shape[0]

    @property
    def is_zero_matrix(self) -> bool:
        return self.rank == 0


def lsq_solve(problem: LeastSquaresProblem) -> LeastSquaresResult:
    """Minimum-norm least-squares solution through the SVD.

    Singular values at or below ``rank_tolerance * sigma_max`` are treated as
    zero. ``cond`` is sigma_max / sigma_rank (inf for a zero matrix, which
    yields the zero solution).

    Args:
        problem: Matrix (dense or sparse), 1-D or 2-D right-hand side, tolerance

    Returns:
        LeastSquaresResult with solution, rank, cond and residual norm
    """
    matrix = problem.matrix
    if sparse.issparse(matrix):
        if matrix.shape[1] > DENSE_COLUMN_LIMIT:
            return _sparse_lsq(problem)
        matrix = matrix.toarray()
    matrix = np.asarray(matrix, dtype=float)
    rhs = problem.rhs

    u, s, vt = scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    sigma_max = s[0] if s.size else 0.0
    rank = int(np.sum(s > problem.rank_tolerance * sigma_max)) if sigma_max > 0 else 0

    if rank == 0:
        LOGGER.warning("Least-squares matrix is numerically zero; returning the zero solution")
        solution = np.zeros((matrix.shape[1],) + rhs.shape[1:])
        cond = float("inf")
    else:
        projected = u[:, :rank].T @ rhs
        scale = 1.0 / s[:rank]
        solution = vt[:rank].T @ (projected * (scale if rhs.ndim == 1 else scale[:, None]))
        cond = float(s[0] / s[rank - 1])

    residual = matrix @ solution - rhs
    result = LeastSquaresResult(
        solution=solution,
        rank=rank,
        cond=cond,
        residual_norm=float(np.linalg.norm(residual)),
        singular_values=s,
    )
    LOGGER.debug(
        "lsq_solve: shape=%s rank=%d cond=%.3e residual=%.3e",
        matrix.shape,
        rank,
        cond,
        result.residual_norm,
    )
    return result


def _sparse_lsq(problem: LeastSquaresProblem) -> LeastSquaresResult:
    matrix = sparse.csr_matrix(problem.matrix)
    if problem.rhs.ndim != 1:
        raise ValueError("Sparse least-squares path takes a single right-hand side")

    LOGGER.info("Solving %dx%d sparse system with LSQR", *matrix.shape)
    solution = lsqr(matrix, problem.rhs, atol=1e-14, btol=1e-14, iter_lim=20 * matrix.shape[1])[0]
    n = matrix.shape[1]
    sigma_max = svds(matrix, k=1, which="LM", return_singular_vectors=False)[0]
    window = min(SPARSE_RANK_WINDOW, min(matrix.shape) - 1)
    smallest = np.sort(svds(matrix, k=window, which="SM", return_singular_vectors=False))
    above = smallest[smallest > problem.rank_tolerance * sigma_max]
    rank = n - (window - above.size)
    estimated = above.size == 0
    if estimated:
        LOGGER.warning(
            "All %d smallest singular values are below tolerance; rank %d is an upper estimate",
            window,
            rank,
        )
    return LeastSquaresResult(
        solution=solution,
        rank=rank,
        cond=float(sigma_max / above[0]) if above.size else float("inf"),
        residual_norm=float(np.linalg.norm(matrix @ solution - problem.rhs)),
        singular_values=np.concatenate([[sigma_max], smallest[::-1]]),
        rank_estimated=estimated,
    )


def infinity_norm_inverse(matrix: FloatArray, tolerance: float = DEFAULT_RANK_TOLERANCE) -> float:
    """Max absolute row sum of the explicit inverse of a square matrix.

    Raises:
        SingularMatrixError: If the matrix is singular at ``tolerance``.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Matrix must be square, got {matrix.shape}")
    s = scipy.linalg.svdvals(matrix)
    if s[0] == 0 or s[-1] <= tolerance * s[0]:
        raise SingularMatrixError(
            f"Matrix of order {matrix.shape[0]} is singular (sigma_min/sigma_max = "
            f"{s[-1] / s[0] if s[0] else 0.0:.3e})"
        )
    inverse = scipy.linalg.inv(matrix)
    return float(np.abs(inverse).sum(axis=1).max())


def normal_equations_solve(matrix: FloatArray | sparse.spmatrix, rhs: FloatArray) -> FloatArray:
    """Dense brute-force (A^T A)^{-1} A^T b, used as an independent oracle."""
    dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix, dtype=float)
    gram = dense.T @ dense
    return scipy.linalg.solve(gram, dense.T @ np.asarray(rhs, dtype=float), assume_a="pos")
