"""
B-spline evaluation on a shared open knot vector at orders m..2m.

Order-q B-splines (q >= m) on a knot vector of order m live on the same knots;
their index range is 0..n+m-q-1. Internally they are evaluated on the knot
vector padded with q-m extra copies of each endpoint, which turns them into
the leading/trailing B-splines of an ordinary order-q open knot vector.
"""

import logging
from dataclasses import dataclass
from math import comb

import numpy as np

from config import get_tolerances
from errors import (
    BadIndex, MultiplicityViolation, OrderOutOfRange, OutOfDomain,
    ResidualTooLarge, Singular, SingularSystem,
)
from knots import padded_knots
from linalg_utils import dense_solve_preconditioned

logger = logging.getLogger(__name__)


def _check_order(kv, q, deriv):
    if not kv.order <= q <= 2 * kv.order:
        raise OrderOutOfRange(f"order {q} outside {kv.order}..{2 * kv.order}")
    if not 0 <= deriv <= q - 1:
        raise OrderOutOfRange(f"derivative {deriv} outside 0..{q - 1} for order {q}")


def _check_domain(kv, xs):
    xs = np.asarray(xs, dtype=float)
    if xs.size and (np.min(xs) < kv.a or np.max(xs) > kv.b or np.isnan(xs).any()):
        bad = xs[(xs < kv.a) | (xs > kv.b) | np.isnan(xs)].ravel()[0]
        raise OutOfDomain(f"abscissa {bad!r} outside [{kv.a!r}, {kv.b!r}]")
    return xs


def _cox_de_boor(P, i, s, xs):
    """Values of the s order-s B-splines on span i of P (indices i-s+1..i), one column per abscissa"""
    npts = xs.size
    N = np.zeros((s, npts))
    N[0] = 1.0
    left = np.zeros((s, npts))
    right = np.zeros((s, npts))
    for j in range(1, s):
        left[j] = xs - P[i + 1 - j]
        right[j] = P[i + j] - xs
        saved = np.zeros(npts)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    return N


def _lift_derivative(P, i, vals, r):
    """Order-r derivative rows from the order-(r-1) rows on span i (0/0 taken as 0)"""
    first = i - r + 1
    lifted = np.zeros((r, vals.shape[1]))
    for row in range(r):
        j = first + row
        if row >= 1:
            d = P[j + r - 1] - P[j]
            if d > 0:
                lifted[row] += vals[row - 1] / d
        if row <= r - 2:
            d = P[j + r] - P[j + 1]
            if d > 0:
                lifted[row] -= vals[row] / d
    return (r - 1) * lifted


def span_basis(kv, q, span, xs, deriv=0):
    """
    Derivatives of order `deriv` of all order-q B-splines nonzero on one span.

    Parameters:
    -----------
    kv : KnotVector
    q : int
        B-spline order, kv.order <= q <= 2*kv.order
    span : int
        Span index i of kv (t_i < t_{i+1}); the abscissae are assumed in [t_i, t_{i+1}]
    xs : array_like
        Abscissae
    deriv : int
        Derivative order

    Returns:
    --------
    (int, ndarray)
        Index of the first returned basis function and an array of shape
        (count, len(xs)); functions outside 0..n+m-q-1 are dropped.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    P = padded_knots(kv, q)
    pad = q - kv.order
    i = span + pad
    vals = _cox_de_boor(P, i, q - deriv, xs)
    for r in range(q - deriv + 1, q + 1):
        vals = _lift_derivative(P, i, vals, r)
    first = span - q + 1
    lo = max(first, 0)
    hi = min(span, kv.n + kv.order - q - 1)
    return lo, vals[lo - first:hi - first + 1]


def eval_basis(kv, q, x, deriv=0, side="right"):
    """
    Values N^{(deriv)}_{q,k}(x) of the B-splines supported at x.

    At x = b the last span is used (left limit); `side="left"` takes left
    limits at interior knots as well.

    Returns:
    --------
    (int, ndarray)
        Index of the first function and the window of at most q values
    """
    _check_order(kv, q, deriv)
    _check_domain(kv, x)
    span = kv.find_span(float(x), side=side)
    first, vals = span_basis(kv, q, span, [float(x)], deriv)
    return first, vals[:, 0]


def basis_row(kv, q, x, deriv=0, side="right"):
    """Dense row (N^{(deriv)}_{q,k}(x))_k of length n+m-q"""
    first, window = eval_basis(kv, q, x, deriv, side)
    row = np.zeros(kv.n + kv.order - q)
    row[first:first + window.size] = window
    return row


def basis_matrix(kv, q, xs, deriv=0, side="right"):
    """Collocation matrix with rows basis_row(kv, q, x, deriv) for x in xs"""
    _check_order(kv, q, deriv)
    xs = np.atleast_1d(_check_domain(kv, xs))
    out = np.zeros((xs.size, kv.n + kv.order - q))
    spans = kv.find_spans(xs, side=side)
    for span in np.unique(spans):
        mask = spans == span
        first, vals = span_basis(kv, q, int(span), xs[mask], deriv)
        out[np.flatnonzero(mask)[:, None], np.arange(first, first + vals.shape[0])] = vals.T
    return out


def evaluate_coefficients(kv, q, coeffs, xs, deriv=0, side="right"):
    """Spline sum_k coeffs_k N^{(deriv)}_{q,k} evaluated at every abscissa of xs"""
    _check_order(kv, q, deriv)
    xs = _check_domain(kv, xs)
    flat = np.atleast_1d(xs).ravel()
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.empty(flat.size)
    spans = kv.find_spans(flat, side=side)
    for span in np.unique(spans):
        mask = spans == span
        first, vals = span_basis(kv, q, int(span), flat[mask], deriv)
        out[mask] = coeffs[first:first + vals.shape[0]] @ vals
    return out.reshape(xs.shape) if xs.ndim else float(out[0])


@dataclass(frozen=True, eq=False)
class Spline:
    """Coefficient vector bound to a knot vector and an order q >= kv.order"""
    kv: object
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        expected = self.kv.n + self.kv.order - self.order
        if coeffs.shape != (expected,):
            raise BadIndex(f"order-{self.order} spline needs {expected} coefficients, got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, x, deriv=0, side="right"):
        return evaluate_coefficients(self.kv, self.order, self.coeffs, x, deriv, side)


def eval_spline(s, x, deriv=0):
    """Value of the spline (or its derivative) at a single abscissa"""
    return float(s(float(x), deriv))


def knot_averages(kv, j):
    """h_{j,k} = (t_{k+j} - t_k)/j for k = 0..n+m-j-1"""
    t = kv.array
    count = kv.n + kv.order - j
    return (t[j:j + count] - t[:count]) / j


def _check_chain_order(kv, j):
    m = kv.order
    if not m <= j <= 2 * m - 1:
        raise OrderOutOfRange(f"derivative matrix index {j} outside {m}..{2 * m - 1}")


def derivative_matrix(kv, j):
    """
    D_j of shape (n+m-j-1) x (n+m-j): 1/h_{j,k} on the diagonal, -1/h_{j,k+1} above it.

    The derivative of the order-(j+1) basis row equals the order-j basis row
    times D_j transposed.
    """
    _check_chain_order(kv, j)
    h = knot_averages(kv, j)
    rows = h.size - 1
    D = np.zeros((rows, h.size))
    idx = np.arange(rows)
    D[idx, idx] = 1.0 / h[:-1]
    D[idx, idx + 1] = -1.0 / h[1:]
    return D


def stripping_matrix(kv, j):
    """D_j^+ = diag(h_j) times the upper-triangular ones pattern with a final zero row"""
    _check_chain_order(kv, j)
    h = knot_averages(kv, j)
    return h[:, None] * np.triu(np.ones((h.size, h.size - 1)))


def strip(v, kv, j):
    """Row vector v times D_j^+, as a scaled cumulative sum"""
    h = knot_averages(kv, j)
    return np.cumsum(np.asarray(v, dtype=float) * h)[:-1]


def derivative_chain(kv, last):
    """Product D_last ... D_m (identity-free: requires last >= m)"""
    m = kv.order
    chain = derivative_matrix(kv, m)
    for j in range(m + 1, last + 1):
        chain = derivative_matrix(kv, j) @ chain
    return chain


def elementary_symmetric(args, r):
    """
    sigma_r of the trailing-axis entries of `args`, by the one-pass recurrence.

    `args` may carry leading batch dimensions; sigma_0 is 1.
    """
    args = np.asarray(args, dtype=float)
    batch = args.shape[:-1]
    e = np.zeros(batch + (r + 1,))
    e[..., 0] = 1.0
    for s in range(args.shape[-1]):
        y = args[..., s:s + 1]
        e[..., 1:] = e[..., 1:] + y * e[..., :-1]
    return e[..., r]


def marsden_coeffs(kv, nu, t):
    """
    Coefficients of (t - x)^{m-1-nu} in the order-m basis.

    Entry k is sigma_{m-1-nu}(t - t_{k+1}, ..., t - t_{k+m-1}) / binom(m-1, nu).
    """
    m, n = kv.order, kv.n
    if not 0 <= nu <= m - 1:
        raise OrderOutOfRange(f"power index {nu} outside 0..{m - 1}")
    knots = kv.array
    window = np.array([knots[k + 1:k + m] for k in range(n)]).reshape(n, m - 1)
    return elementary_symmetric(t - window, m - 1 - nu) / comb(m - 1, nu)


def truncated_power_coeffs(kv, ell, nu):
    """
    Coefficients c_{ell,nu} of (t_ell - x)_+^{m-1-nu} in the order-m basis.

    `ell` is the 0-based first occurrence of an interior knot and nu must be
    below its multiplicity. Entries with k >= ell-m+1+nu are exactly zero.
    """
    m, n = kv.order, kv.n
    if not m <= ell <= n - 1 or kv.knots[ell - 1] == kv.knots[ell]:
        raise BadIndex(f"index {ell} is not the first occurrence of an interior knot")
    mult = kv.multiplicity(ell)
    if not 0 <= nu < mult:
        raise MultiplicityViolation(f"power index {nu} requires multiplicity > {nu}, knot has {mult}")
    coeffs = marsden_coeffs(kv, nu, kv.knots[ell])
    coeffs[ell - m + 1 + nu:] = 0.0
    return coeffs


def represent_in(kv_target, q, f, tol=None):
    """
    Exact representation of a piecewise polynomial in S_q(kv_target).

    Parameters:
    -----------
    kv_target : KnotVector
    q : int
        Target order
    f : callable
        Vectorized function known to lie in the target space
    tol : Tolerances, optional

    Returns:
    --------
    Spline
        Interpolant at the Greville abscissae, verified on a 200-point grid
    """
    tol = tol or get_tolerances()
    nodes = kv_target.greville(q)
    collocation = basis_matrix(kv_target, q, nodes)
    try:
        coeffs = dense_solve_preconditioned(collocation, np.asarray(f(nodes), dtype=float), tol).solution
    except Singular as e:
        raise SingularSystem(f"Greville collocation failed: {e}") from e
    spline = Spline(kv_target, q, coeffs)
    grid = np.linspace(kv_target.a, kv_target.b, 200)
    exact = np.asarray(f(grid), dtype=float)
    residual = np.max(np.abs(exact - spline(grid)))
    scale = max(1.0, float(np.max(np.abs(exact))))
    if residual > tol.represent_residual * scale:
        raise ResidualTooLarge(f"function not in the target spline space: residual {residual:.3e}")
    logger.debug("represent_in: order %d, %d coefficients, residual %.2e", q, coeffs.size, residual)
    return spline
