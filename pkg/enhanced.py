"""
Enhanced approximate duals.

The enhanced matrix S_L = S + P^T U_m P, with P = D_{2m-1}...D_m, makes the
kernel L(x, y) = Phi_m(y) S_L Phi_m(x)^T reproduce, on top of all
polynomials of degree < m, the truncated powers (theta_l - x)_+^{m-1-nu}
(nu < mu_j) of every selected coarse knot, and with them all splines on the
coarse knot vector. U_m solves A U_m = B where

    A[(j, nu), k] = (m-1-nu)! N^{(nu)}_{2m,k}(theta_{l_j})
    B[(j, nu), :] = w with c_{l_j,nu}^T (I - Gamma S) = w P.

Rows of B are obtained by stripping v = c^T (I - Gamma S) with the scaled
cumulative sums of D_m^+ ... D_{2m-1}^+.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from bspline import (
    basis_row, derivative_chain, eval_basis, knot_averages, marsden_coeffs,
    truncated_power_coeffs,
)
from config import DEFAULT_METHOD, DEFAULT_SEED, get_tolerances
from errors import RankDeficient, Singular, SingularA0, UsageError, ZeroPatternViolation
from gram_dual import ApproxDual, approx_dual
from linalg_utils import as_dense, dense_solve_preconditioned, solve_normal_equations, to_coo

logger = logging.getLogger(__name__)

METHODS = ("a0", "mp")


@dataclass(frozen=True, eq=False)
class EnhancedDual:
    """
    Enhanced approximate dual: base dual, coarse selection and every matrix of the construction.

    `condition` is the condition number of the row-scaled A_0 for the A0 route
    and None for the Moore-Penrose route.
    """
    base: ApproxDual
    sel: object
    A: object
    B: object
    R: np.ndarray
    U: object
    S_L: object
    method: str
    bandwidth: int
    condition: float = None

    @property
    def kv(self):
        return self.base.kv

    @cached_property
    def matrix(self):
        return self.S_L.toarray()


def build_A(kv, sel):
    """Collocation rows (m-1-nu)! N^{(nu)}_{2m,k}(theta_{l_j}), k = 0..n-m-1"""
    m, n = kv.order, kv.n
    rows = [factorial(m - 1 - nu) * basis_row(kv, 2 * m, kv.knots[ell], nu) for ell, nu in sel.rows()]
    return to_coo(np.array(rows).reshape(len(rows), n - m))


def _residual_window(e, gram, S, lo, hi, m, magnitude=None):
    """
    Entries lo..hi of e^T (I - Gamma S) and a bound on the magnitude of the summed terms.

    `magnitude` bounds |e| entrywise when e is itself a difference that has
    cancelled; |e| is used when omitted.
    """
    n = e.size
    magnitude = np.abs(e) if magnitude is None else magnitude
    j_lo, j_hi = max(0, lo - m + 1), min(n - 1, hi + m - 1)
    i_lo, i_hi = max(0, j_lo - m + 1), min(n - 1, j_hi + m - 1)
    e_i = e[i_lo:i_hi + 1]
    g_block = gram[i_lo:i_hi + 1, j_lo:j_hi + 1]
    s_block = S[j_lo:j_hi + 1, lo:hi + 1]
    eg = e_i @ g_block
    value = e[lo:hi + 1] - eg @ s_block
    bound = magnitude[lo:hi + 1] + (magnitude[i_lo:i_hi + 1] @ np.abs(g_block)) @ np.abs(s_block)
    return value, bound


def _split_residual(kv, gram, S, ell, nu, lo, hi):
    """
    v = c^T (I - Gamma S) on lo..hi.

    Left of the truncation point v is evaluated from c minus the full power
    (which vanishes there), right of it from c itself (which vanishes there);
    both represent the same v because the full power is reproduced. The bound
    on the left is taken before the subtraction, so rows that vanish exactly
    keep the scale of the terms that cancelled.
    """
    m = kv.order
    c = truncated_power_coeffs(kv, ell, nu)
    full = marsden_coeffs(kv, nu, kv.knots[ell])
    split = ell - m + 1 + nu
    left, left_bound = _residual_window(c - full, gram, S, lo, hi, m, np.abs(c) + np.abs(full))
    right, right_bound = _residual_window(c, gram, S, lo, hi, m)
    ks = np.arange(lo, hi + 1)
    return np.where(ks < split, left, right), np.where(ks < split, left_bound, right_bound)


def _strip_all(kv, v, bound, check=None):
    """Apply D_m^+ ... D_{2m-1}^+; `check(total, scale, j)` sees every dropped total"""
    m = kv.order
    for j in range(m, 2 * m):
        h = knot_averages(kv, j)
        sums = np.cumsum(v * h)
        bounds = np.cumsum(bound * h)
        if check is not None:
            check(sums[-1], bounds[-1], j)
        v, bound = sums[:-1], bounds[:-1]
    return v, bound


def pattern_range(kv, ell):
    """Inclusive index range of the possibly nonzero entries of a B row for knot index ell"""
    m = kv.order
    return ell - 2 * m + 1 + kv.multiplicity(ell), ell - 2


def _b_row_window(kv, gram, S, ell, nu, tol):
    m, n = kv.order, kv.n
    lo, hi = max(0, ell - 2 * m + 2), min(n - 1, ell - 2)
    v = np.zeros(n)
    bound = np.zeros(n)
    v[lo:hi + 1], bound[lo:hi + 1] = _split_residual(kv, gram, S, ell, nu, lo, hi)
    w, w_bound = _strip_all(kv, v, bound)
    first, last = pattern_range(kv, ell)
    w[last + 1:] = 0.0
    scale = max(np.max(w_bound, initial=0.0), np.finfo(float).tiny)
    leading = w[:max(first, 0)]
    if np.any(np.abs(leading) > tol.zero_pattern * scale):
        raise ZeroPatternViolation(
            f"B row for knot index {ell}, nu={nu}: entries before {first} do not vanish "
            f"(max {np.max(np.abs(leading)):.3e})"
        )
    w[:max(first, 0)] = 0.0
    return w, scale


def _b_row_full(kv, gram, S, ell, nu, tol):
    """Same row from the residual over the whole index range, with every structural check"""
    m, n = kv.order, kv.n
    v, bound = _split_residual(kv, gram, S, ell, nu, 0, n - 1)

    def check(total, scale, j):
        if abs(total) > tol.zero_pattern * max(scale, np.finfo(float).tiny):
            raise ZeroPatternViolation(
                f"B row for knot index {ell}, nu={nu}: stripping D_{j}^+ drops a nonzero total {total:.3e}"
            )

    w, w_bound = _strip_all(kv, v, bound, check)
    first, last = pattern_range(kv, ell)
    ks = np.arange(w.size)
    outside = (ks < first) | (ks > last)
    scale = max(np.max(w_bound, initial=0.0), np.finfo(float).tiny)
    if np.any(np.abs(w[outside]) > tol.zero_pattern * scale):
        raise ZeroPatternViolation(
            f"B row for knot index {ell}, nu={nu}: nonzero entries outside {first}..{last}"
        )
    chain = derivative_chain(kv, 2 * m - 1)
    recomposed = w @ chain
    allowed = tol.consistency * (w_bound @ np.abs(chain) + bound)
    if np.any(np.abs(recomposed - v) > allowed):
        raise ZeroPatternViolation(f"B row for knot index {ell}, nu={nu}: w P differs from v")
    return w, scale


def build_B(kv, S, sel, gram, tol=None, validate="one", seed=DEFAULT_SEED):
    """
    Right-hand side rows w_{l_j,nu} of A U_m = B.

    Parameters:
    -----------
    kv : KnotVector
    S : ndarray
        Approximate-dual matrix from the reproduction system
    sel : CoarseSelection
    gram : ndarray
        Gramian
    validate : str
        "one" recomputes one randomly chosen row over the full index range,
        "all" every row, "none" skips the cross-check
    seed : int
        Seed choosing the cross-checked row

    Returns:
    --------
    scipy.sparse.coo_matrix of shape (r_tilde, n-m)
    """
    tol = tol or get_tolerances()
    S, gram = as_dense(S), as_dense(gram)
    rows = sel.rows()
    B = np.zeros((len(rows), kv.n - kv.order))
    for r, (ell, nu) in enumerate(rows):
        B[r], _ = _b_row_window(kv, gram, S, ell, nu, tol)

    if validate == "all":
        checked = range(len(rows))
    elif validate == "one" and rows:
        checked = [int(np.random.default_rng(seed).integers(len(rows)))]
    else:
        checked = []
    for r in checked:
        ell, nu = rows[r]
        full, scale = _b_row_full(kv, gram, S, ell, nu, tol)
        gap = np.max(np.abs(full - B[r]), initial=0.0)
        if gap > tol.zero_pattern * scale:
            raise ZeroPatternViolation(
                f"B row for knot index {ell}, nu={nu}: window and full computation differ by {gap:.3e}"
            )
    return to_coo(B)


def a0_columns(sel, m):
    """Column set K: l_j - m + s for s = 0..mu_j-1, knot by knot"""
    return [ell - m + s for ell, mu in zip(sel.indices, sel.multiplicities) for s in range(mu)]


@dataclass(frozen=True)
class RightInverse:
    matrix: np.ndarray
    condition: float = None


def right_inverse(A, method, sel, m, tol=None):
    """
    Right inverse R of A (A R = I).

    "mp": R = A^T (A A^T)^{-1}.
    "a0": R is zero except in the rows K of a0_columns, which hold A_0^{-1}
    for the square column block A_0 = A[:, K].
    """
    tol = tol or get_tolerances()
    A = as_dense(A)
    r, cols = A.shape
    condition = None
    if method == "mp":
        R = solve_normal_equations(A, np.eye(r), tol)
    elif method == "a0":
        K = a0_columns(sel, m)
        A0 = A[:, K]
        R = np.zeros((cols, r))
        off_diagonal = A0 - np.diag(np.diag(A0))
        if not np.any(off_diagonal) and np.all(np.diag(A0) > 0):
            R[K, np.arange(r)] = 1.0 / np.diag(A0)
            condition = 1.0
        else:
            if not np.linalg.det(A0) > 0:
                raise SingularA0(f"det A_0 = {np.linalg.det(A0):.3e} is not positive")
            try:
                solved = dense_solve_preconditioned(A0, np.eye(r), tol)
            except Singular as e:
                raise SingularA0(str(e)) from e
            R[K, :] = solved.solution
            condition = solved.condition
    else:
        raise UsageError(f"unknown right-inverse method {method!r}, expected one of {METHODS}")
    defect = np.max(np.abs(A @ R - np.eye(r)), initial=0.0)
    if defect > tol.right_inverse:
        raise RankDeficient(f"A R differs from the identity by {defect:.3e}")
    return RightInverse(matrix=R, condition=condition)


def realized_bandwidth(matrix):
    coo = to_coo(as_dense(matrix))
    return int(np.max(np.abs(coo.row - coo.col), initial=0))


def assemble_SL(base, U):
    """S_L = S + P^T U_m P with P = D_{2m-1}...D_m"""
    chain = derivative_chain(base.kv, 2 * base.m - 1)
    return to_coo(base.matrix + chain.T @ as_dense(U) @ chain)


def build_enhanced(base, sel, method=DEFAULT_METHOD, tol=None, validate="one", seed=DEFAULT_SEED):
    """
    Enhanced approximate dual for a coarse selection.

    Parameters:
    -----------
    base : ApproxDual or KnotVector
        A knot vector is turned into its approximate dual first
    sel : CoarseSelection
    method : str
        "a0" (default) or "mp"

    Returns:
    --------
    EnhancedDual
    """
    tol = tol or get_tolerances()
    if not isinstance(base, ApproxDual):
        base = approx_dual(base, tol)
    kv, m = base.kv, base.m
    A = build_A(kv, sel)
    B = build_B(kv, base.matrix, sel, base.gram_matrix, tol, validate, seed)
    inverse = right_inverse(A, method, sel, m, tol)
    U = inverse.matrix @ B.toarray()
    residual = np.max(np.abs(A.toarray() @ U - B.toarray()), initial=0.0)
    if residual > tol.right_inverse * max(1.0, np.max(np.abs(B.toarray()), initial=0.0)):
        raise RankDeficient(f"A U_m differs from B by {residual:.3e}")
    S_L = assemble_SL(base, U)
    bandwidth = realized_bandwidth(S_L)
    logger.debug(
        "Enhanced dual: order %d, n=%d, r~=%d, method %s, bandwidth %d, condition %s",
        m, kv.n, sel.r_tilde, method, bandwidth, inverse.condition,
    )
    return EnhancedDual(
        base=base, sel=sel, A=A, B=B, R=inverse.matrix, U=to_coo(U), S_L=S_L,
        method=method, bandwidth=bandwidth, condition=inverse.condition,
    )


def kernel_L_eval(ed, x, y):
    """L(x, y) = Phi_m(y) S_L Phi_m(x)^T; not symmetric in general"""
    m = ed.base.m
    fx, vx = eval_basis(ed.kv, m, x)
    fy, vy = eval_basis(ed.kv, m, y)
    block = ed.matrix[fy:fy + vy.size, fx:fx + vx.size]
    return float(vy @ block @ vx)


def truncated_power_residual(kv, sel, S_L, gram):
    """max over selected (l_j, nu) of |c^T (I - Gamma S_L)|, relative to max |c|"""
    S_L, gram = as_dense(S_L), as_dense(gram)
    worst = 0.0
    for ell, nu in sel.rows():
        c = truncated_power_coeffs(kv, ell, nu)
        residual = c - (c @ gram) @ S_L
        worst = max(worst, np.max(np.abs(residual)) / np.max(np.abs(c)))
    return worst
