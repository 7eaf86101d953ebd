"""
Gramian, approximate-dual matrix S and the kernel K.

The approximate dual of the order-m B-spline basis Phi_m is Phi_m S with S
symmetric, positive definite and of bandwidth m-1. S is the only such matrix
for which K(x, y) = Phi_m(y) S Phi_m(x)^T reproduces all polynomials of
degree < m; `solve_S_unique` computes it from exactly that property and is
the constructor every downstream consumer uses. `assemble_S` builds the same
matrix from the explicit sum of derivative terms, with per-term scale
factors measured by `calibrate_F_normalization`.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb

import numpy as np
import scipy.linalg

from bspline import (
    basis_row, derivative_chain, elementary_symmetric, eval_basis, knot_averages, span_basis,
)
from config import get_tolerances
from errors import NotAScalarMismatch, SingularReproductionSystem, TooFewArguments, UsageError
from knots import geometric_open_knots, uniform_open_knots
from linalg_utils import BandedSymMatrix, gauss_legendre

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ApproxDual:
    """
    Approximate dual on one knot vector.

    per_nu_terms holds the m summands of the derivative-term expansion of S
    when it was assembled that way, and is empty for the reproduction-system
    constructor.
    """
    kv: object
    S: BandedSymMatrix
    gram: BandedSymMatrix
    per_nu_terms: tuple = ()

    @property
    def m(self):
        return self.kv.order

    @cached_property
    def matrix(self):
        return self.S.to_dense()

    @cached_property
    def gram_matrix(self):
        return self.gram.to_dense()


def gram_matrix(kv):
    """
    Gramian of the order-m B-splines, integrated spanwise with m Gauss points.

    Returns:
    --------
    BandedSymMatrix
        Bandwidth m-1
    """
    m, n = kv.order, kv.n
    rule = gauss_legendre(m)
    gram = np.zeros((n, n))
    t = kv.array
    for span in kv.spans():
        xs, ws = rule.on_interval(t[span], t[span + 1])
        first, vals = span_basis(kv, m, span, xs)
        block = (vals * ws) @ vals.T
        gram[first:first + m, first:first + m] += block
    return BandedSymMatrix.from_dense(gram, m - 1)


def _matchings(indices, count):
    """All sets of `count` disjoint unordered pairs drawn from `indices`"""
    if count == 0:
        yield ()
        return
    if len(indices) < 2 * count:
        return
    first, rest = indices[0], indices[1:]
    yield from _matchings(rest, count)
    for pos, other in enumerate(rest):
        remaining = rest[:pos] + rest[pos + 1:]
        for tail in _matchings(remaining, count - 1):
            yield ((first, other),) + tail


def F_nu(args, nu):
    """
    Symmetric polynomial F_nu of degree 2nu.

    F_nu(x_1..x_r) = (2^nu nu!)^{-1} sum over distinct index tuples
    (i_1, j_1, ..., i_nu, j_nu) of prod (x_i - x_j)^2. Every set of nu
    disjoint pairs occurs 2^nu nu! times in that sum, so the sum is taken
    over pair sets once. `args` may carry leading batch dimensions.
    """
    args = np.asarray(args, dtype=float)
    if nu == 0:
        return np.ones(args.shape[:-1]) if args.ndim > 1 else 1.0
    r = args.shape[-1]
    if r < 2 * nu:
        raise TooFewArguments(f"F_{nu} needs at least {2 * nu} arguments, got {r}")
    total = np.zeros(args.shape[:-1])
    for pairs in _matchings(tuple(range(r)), nu):
        term = np.ones(args.shape[:-1])
        for i, j in pairs:
            term = term * (args[..., i] - args[..., j]) ** 2
        total = total + term
    return total if args.ndim > 1 else float(total)


def nu_coefficients(kv, nu):
    """u_k^(nu) = F_nu(t_{k+1}, ..., t_{k+m+nu-1}) / h_{m+nu,k}, k = 0..n-nu-1"""
    m, n = kv.order, kv.n
    t = kv.array
    count = n - nu
    h = knot_averages(kv, m + nu)
    if nu == 0:
        return 1.0 / h
    window = np.array([t[k + 1:k + m + nu] for k in range(count)])
    return F_nu(window, nu) / h


def nu_terms(kv):
    """Unscaled summands T_nu = P_nu^T diag(u^(nu)) P_nu, nu = 0..m-1, with P_nu = D_{m+nu-1}...D_m"""
    m = kv.order
    terms = [np.diag(nu_coefficients(kv, 0))]
    for nu in range(1, m):
        chain = derivative_chain(kv, m + nu - 1)
        terms.append(chain.T @ (nu_coefficients(kv, nu)[:, None] * chain))
    return terms


def assemble_S(kv, calibration=None):
    """
    S = U_0 + sum_nu alpha_nu D_m^T...D_{m+nu-1}^T U_nu D_{m+nu-1}...D_m.

    Parameters:
    -----------
    kv : KnotVector
    calibration : sequence of float, optional
        alpha_{m,1..m-1}; all ones when omitted

    Returns:
    --------
    ApproxDual
    """
    m = kv.order
    alphas = (1.0,) * (m - 1) if calibration is None else tuple(calibration)
    terms = nu_terms(kv)
    scaled = [terms[0]] + [alpha * term for alpha, term in zip(alphas, terms[1:])]
    S = np.sum(scaled, axis=0)
    return ApproxDual(
        kv=kv,
        S=BandedSymMatrix.from_dense(S, m - 1),
        gram=gram_matrix(kv),
        per_nu_terms=tuple(scaled),
    )


def _local_polynomials(kv, i, window):
    """Coefficient rows of ((xi_i - x)/w)^{m-1-nu}, nu = 0..m-1, centred on basis function i"""
    m = kv.order
    t = kv.array
    center = t[i + 1:i + m].mean() if m > 1 else 0.5 * (t[i] + t[i + 1])
    width = t[i + m] - t[i]
    rows = []
    for nu in range(m):
        sigma = elementary_symmetric(center - window, m - 1 - nu)
        rows.append(sigma / (comb(m - 1, nu) * width ** (m - 1 - nu)))
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class ReproductionSystem:
    """
    Equations sum_j s_ij (Gamma c_p)_j = (c_p)_i of polynomial reproduction.

    Row i carries one equation per polynomial p of a basis scaled to the support
    of N_{m,i}; every equation is divided by its largest moment. moments[i, p, k]
    multiplies s_{i, columns[i, k]}, and entries outside the matrix are masked
    by `valid`.
    """
    moments: np.ndarray
    targets: np.ndarray
    columns: np.ndarray
    valid: np.ndarray

    @property
    def n(self):
        return self.targets.shape[0]

    def apply(self, S):
        """Left-hand sides for a dense candidate S"""
        band = S[np.arange(self.n)[:, None], self.columns] * self.valid
        return np.einsum("ik,ipk->ip", band, self.moments)

    def residual(self, S):
        return self.apply(S) - self.targets

    def relative(self, residual):
        """max |residual| relative to the largest right-hand side"""
        return float(np.max(np.abs(residual)) / np.max(np.abs(self.targets)))


def reproduction_system(kv):
    """Equilibrated reproduction equations of kv, see `ReproductionSystem`"""
    m, n = kv.order, kv.n
    gram = gram_matrix(kv).to_dense()
    t = kv.array
    window = np.array([t[k + 1:k + m] for k in range(n)]).reshape(n, m - 1)
    columns = np.arange(n)[:, None] + np.arange(1 - m, m)
    valid = (columns >= 0) & (columns < n)
    columns = np.clip(columns, 0, n - 1)

    moments = np.zeros((n, m, 2 * m - 1))
    targets = np.zeros((n, m))
    for i in range(n):
        coeffs = _local_polynomials(kv, i, window)
        moments[i] = (coeffs @ gram[:, columns[i]]) * valid[i]
        targets[i] = coeffs[:, i]
    scale = np.max(np.abs(moments), axis=2)
    return ReproductionSystem(
        moments=moments / scale[..., None], targets=targets / scale, columns=columns, valid=valid,
    )


def _fit_expansion(terms, system):
    """
    Scalars alpha_1..alpha_{m-1} for which T_0 + sum alpha_nu T_nu best satisfies
    `system`, and the relative residual they leave.
    """
    base = system.residual(terms[0]).ravel()
    if len(terms) == 1:
        return np.zeros(0), system.relative(base)
    design = np.column_stack([system.apply(term).ravel() for term in terms[1:]])
    norms = np.linalg.norm(design, axis=0)
    design = design / norms
    y = scipy.linalg.lstsq(design, -base)[0]
    y += scipy.linalg.lstsq(design, -base - design @ y)[0]
    return y / norms, system.relative(base + design @ y)


def _solve_entries(system, m):
    """
    Least-squares solve for the band entries s_ij (i <= j <= i+m-1).

    Columns are scaled to unit norm and the solution gets one step of iterative
    refinement. Returns the dense S and its relative residual.
    """
    n = system.n
    pairs = [(i, j) for i in range(n) for j in range(i, min(n, i + m))]
    column = {pair: c for c, pair in enumerate(pairs)}
    matrix = np.zeros((n * m, len(pairs)))
    for i in range(n):
        for k in np.flatnonzero(system.valid[i]):
            j = system.columns[i, k]
            matrix[i * m:(i + 1) * m, column[(min(i, j), max(i, j))]] = system.moments[i, :, k]
    rhs = system.targets.ravel()
    norms = np.linalg.norm(matrix, axis=0)
    matrix = matrix / norms

    x, _, rank, sv = scipy.linalg.lstsq(matrix, rhs)
    x += scipy.linalg.lstsq(matrix, rhs - matrix @ x)[0]
    logger.debug(
        "Entry solve: %d unknowns, numerical rank %d, singular value ratio %.2e",
        len(pairs), rank, sv[-1] / sv[0],
    )
    x = x / norms
    S = np.zeros((n, n))
    for (i, j), value in zip(pairs, x):
        S[i, j] = S[j, i] = value
    return S, system.relative(system.residual(S))


def solve_S_unique(kv, tol=None, method="expansion"):
    """
    The unique symmetric band-(m-1) matrix S with S Gamma c_p = c_p for all p in P_{m-1}.

    method="expansion" searches S among T_0 + sum alpha_nu T_nu, with the
    scalars alpha fitted to the reproduction equations of this knot vector;
    by uniqueness, a fit that satisfies every equation is the solution. When
    the fit leaves a residual the band entries are solved for directly, which
    is what method="entries" does from the start. The entry system loses
    accuracy with n and m (condition numbers beyond 1e8 at m = 6) but is
    judged only by its residual.

    Returns:
    --------
    BandedSymMatrix
    """
    tol = tol or get_tolerances()
    if method not in ("expansion", "entries"):
        raise UsageError(f"unknown reproduction solve {method!r}, expected 'expansion' or 'entries'")
    m, n = kv.order, kv.n
    system = reproduction_system(kv)

    if method == "expansion":
        terms = nu_terms(kv)
        alphas, residual = _fit_expansion(terms, system)
        if residual <= tol.reproduction_system:
            S = terms[0] + sum(alpha * term for alpha, term in zip(alphas, terms[1:]))
            logger.debug("solve_S_unique: order %d, n=%d, expansion fit residual %.2e", m, n, residual)
            return BandedSymMatrix.from_dense(S, m - 1)
        logger.warning(
            "Order %d, n=%d: derivative terms leave residual %.2e, solving for the band entries",
            m, n, residual,
        )

    S, residual = _solve_entries(system, m)
    if not residual <= tol.reproduction_system:
        raise SingularReproductionSystem(f"reproduction system unsolved: relative residual {residual:.3e}")
    logger.debug("solve_S_unique: order %d, n=%d, entry solve residual %.2e", m, n, residual)
    return BandedSymMatrix.from_dense(S, m - 1)


def approx_dual(kv, tol=None):
    """Approximate dual with S from the reproduction system"""
    return ApproxDual(kv=kv, S=solve_S_unique(kv, tol), gram=gram_matrix(kv))


def _fit_alphas(kv, tol):
    m = kv.order
    alphas, misfit = _fit_expansion(nu_terms(kv), reproduction_system(kv))
    if misfit > tol.calibration:
        raise NotAScalarMismatch(
            f"order {m}: derivative terms do not match S up to per-term scalars (residual {misfit:.3e})"
        )
    return alphas


def _check_against_entries(kv, alphas, tol):
    """The assembled S must agree with the directly solved band entries"""
    assembled = assemble_S(kv, alphas).matrix
    solved = solve_S_unique(kv, tol, method="entries").to_dense()
    gap = np.max(np.abs(assembled - solved)) / np.max(np.abs(solved))
    if gap > tol.calibration:
        raise NotAScalarMismatch(
            f"order {kv.order}: assembled S differs from the entry solve by {gap:.3e} relative"
        )


@lru_cache(maxsize=None)
def calibrate_F_normalization(m, tol=None):
    """
    Per-term scale factors alpha_{m,1..m-1} of the derivative-term expansion of S.

    Measured on a uniform reference knot vector with 4m simple interior knots,
    re-checked on a geometrically graded one, and compared with the band
    entries solved without the expansion.
    """
    tol = tol or get_tolerances()
    if m == 1:
        return ()
    reference = uniform_open_knots(m, 4 * m + 1)
    uniform = _fit_alphas(reference, tol)
    graded = _fit_alphas(geometric_open_knots(m, 4 * m + 1, ratio=1.15), tol)
    spread = np.max(np.abs(uniform - graded) / np.abs(uniform))
    if spread > tol.calibration:
        raise NotAScalarMismatch(
            f"order {m}: scale factors depend on the knot vector (relative spread {spread:.3e})"
        )
    _check_against_entries(reference, uniform, tol)
    logger.debug("Calibrated order %d: alpha = %s", m, uniform)
    return tuple(float(a) for a in uniform)


def kernel_K_eval(ad, x, y):
    """K(x, y) = Phi_m(y) S Phi_m(x)^T from the local basis windows"""
    m = ad.m
    fx, vx = eval_basis(ad.kv, m, x)
    fy, vy = eval_basis(ad.kv, m, y)
    block = ad.matrix[fy:fy + vy.size, fx:fx + vx.size]
    return float(vy @ block @ vx)


def kernel_K_expansion(kv, x, y, calibration):
    """K(x, y) as sum_nu alpha_nu sum_k u_k^(nu) N^(nu)_{m+nu,k}(x) N^(nu)_{m+nu,k}(y)"""
    m = kv.order
    alphas = (1.0,) + tuple(calibration)
    total = 0.0
    for nu in range(m):
        u = nu_coefficients(kv, nu)
        rx = basis_row(kv, m + nu, x, nu)
        ry = basis_row(kv, m + nu, y, nu)
        total += alphas[nu] * float(np.sum(u * rx * ry))
    return total
