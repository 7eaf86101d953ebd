"""
Dense and banded linear algebra helpers plus Gauss-Legendre quadrature
"""

import logging
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix

from config import get_tolerances
from errors import NotPositiveDefinite, OrderOutOfRange, RankDeficient, Singular

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]"""
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def p(self):
        return self.nodes.size

    def on_interval(self, lo, hi):
        """Nodes and weights mapped to [lo, hi]"""
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


_RULES = {}
_RULES_LOCK = threading.Lock()


def _legendre_newton(p):
    k = np.arange(1, p + 1)
    y = np.cos(np.pi * (k - 0.25) / (p + 0.5))
    for _ in range(100):
        prev, cur = np.ones_like(y), y.copy()
        for j in range(2, p + 1):
            prev, cur = cur, ((2 * j - 1) * y * cur - (j - 1) * prev) / j
        slope = p * (y * cur - prev) / (y * y - 1.0)
        step = cur / slope
        y = y - step
        if np.max(np.abs(step)) <= 2 * np.finfo(float).eps:
            break
    # derivative at the converged roots
    prev, cur = np.ones_like(y), y.copy()
    for j in range(2, p + 1):
        prev, cur = cur, ((2 * j - 1) * y * cur - (j - 1) * prev) / j
    slope = p * (y * cur - prev) / (y * y - 1.0)
    weights = 2.0 / ((1.0 - y * y) * slope * slope)
    nodes, weights = y[::-1], weights[::-1]
    # exact symmetry about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def gauss_legendre(p):
    """
    p-point Gauss-Legendre rule on [-1, 1], exact for degree <= 2p-1.

    Rules are computed once by Newton iteration on the Legendre recurrence
    and cached.
    """
    if not 1 <= p <= 32:
        raise OrderOutOfRange(f"quadrature order {p} outside 1..32")
    with _RULES_LOCK:
        rule = _RULES.get(p)
        if rule is None:
            nodes, weights = _legendre_newton(p)
            nodes.flags.writeable = False
            weights.flags.writeable = False
            rule = QuadratureRule(nodes=nodes, weights=weights)
            _RULES[p] = rule
    return rule


@dataclass(frozen=True, eq=False)
class BandedSymMatrix:
    """
    Symmetric band matrix in LAPACK lower storage: bands[d, i] = M[i+d, i].
    """
    bands: np.ndarray

    @property
    def dim(self):
        return self.bands.shape[1]

    @property
    def bandwidth(self):
        return self.bands.shape[0] - 1

    @classmethod
    def from_dense(cls, matrix, bandwidth):
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        bands = np.zeros((bandwidth + 1, n))
        for d in range(bandwidth + 1):
            bands[d, :n - d] = np.diagonal(matrix, -d)
        return cls(bands=bands)

    def to_dense(self):
        n = self.dim
        out = np.zeros((n, n))
        for d in range(self.bandwidth + 1):
            diag = self.bands[d, :n - d]
            out += np.diag(diag, -d)
            if d:
                out += np.diag(diag, d)
        return out

    def entry(self, i, j):
        d = abs(i - j)
        return float(self.bands[d, min(i, j)]) if d <= self.bandwidth else 0.0

    def __matmul__(self, other):
        return self.to_dense() @ other


def banded_cholesky(M):
    """Lower banded Cholesky factor of M (same storage layout)"""
    try:
        return scipy.linalg.cholesky_banded(M.bands, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"banded Cholesky failed: {e}") from e


def banded_factor_to_dense(factor):
    """Dense lower-triangular matrix from a banded Cholesky factor"""
    return np.tril(BandedSymMatrix(bands=factor).to_dense())


def cholesky_banded_solve(M, rhs):
    """Solve M x = rhs for a positive definite BandedSymMatrix"""
    factor = banded_cholesky(M)
    return scipy.linalg.cho_solve_banded((factor, True), np.asarray(rhs, dtype=float))


def to_coo(matrix, drop_below=0.0):
    """Coordinate-format copy of a dense matrix without explicit zeros"""
    dense = np.asarray(matrix, dtype=float)
    if drop_below:
        dense = np.where(np.abs(dense) > drop_below, dense, 0.0)
    coo = coo_matrix(dense)
    coo.eliminate_zeros()
    coo.sum_duplicates()
    return coo


def as_dense(matrix):
    if hasattr(matrix, "toarray"):
        return matrix.toarray()
    if isinstance(matrix, BandedSymMatrix):
        return matrix.to_dense()
    return np.asarray(matrix, dtype=float)


def solve_normal_equations(A, B, tol=None):
    """
    Moore-Penrose right-inverse application U = A^T (A A^T)^{-1} B.

    Parameters:
    -----------
    A : array_like or sparse, shape (r, c) with full row rank
    B : array_like or sparse, shape (r, k)

    Returns:
    --------
    ndarray of shape (c, k)
    """
    tol = tol or get_tolerances()
    A, B = as_dense(A), as_dense(B)
    gram = A @ A.T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise RankDeficient(f"A A^T is not positive definite: {e}") from e
    U = A.T @ scipy.linalg.cho_solve(factor, B)
    residual = np.max(np.abs(A @ U - B), initial=0.0)
    if not residual <= tol.right_inverse * max(1.0, np.max(np.abs(B), initial=0.0)):
        raise RankDeficient(f"normal equations residual {residual:.3e}")
    return U


@dataclass(frozen=True)
class PreconditionedSolve:
    solution: np.ndarray
    condition: float


def dense_solve_preconditioned(A0, B0, tol=None):
    """
    Solve A0 X = B0 after scaling each row by its max-abs entry.

    Returns the solution and the 2-norm condition number of the scaled matrix.
    """
    tol = tol or get_tolerances()
    A0 = np.asarray(A0, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    scale = np.max(np.abs(A0), axis=1)
    if np.any(scale == 0.0):
        raise Singular("square system has a zero row")
    scaled = A0 / scale[:, None]
    condition = float(np.linalg.cond(scaled))
    if not np.isfinite(condition) or condition > tol.max_condition:
        raise Singular(f"preconditioned matrix is singular (condition {condition:.3e})")
    rhs = B0 / (scale[:, None] if B0.ndim == 2 else scale)
    lu = scipy.linalg.lu_factor(scaled)
    solution = scipy.linalg.lu_solve(lu, rhs)
    logger.debug("Preconditioned %dx%d solve, condition %.3f", *A0.shape, condition)
    return PreconditionedSolve(solution=solution, condition=condition)
