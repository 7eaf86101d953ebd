"""
Quasi-projections driven by the kernels K and L, the orthogonal projection
and L2 error measurement.

Every projector works in coefficient space: the moment vector
g_k = int f N_{m,k} is mapped to spline coefficients by S^T g (kernel K),
S_L^T g (kernel L) or by solving Gamma c = g (orthogonal projection).
"""

import logging
from dataclasses import dataclass

import numpy as np

from bspline import Spline, span_basis
from config import DEFAULT_METHOD
from enhanced import build_enhanced
from errors import UsageError
from gram_dual import approx_dual, gram_matrix
from linalg_utils import BandedSymMatrix, as_dense, cholesky_banded_solve, gauss_legendre

logger = logging.getLogger(__name__)

KINDS = ("K", "L", "Orthogonal")

# Spellings accepted on the command line
KIND_ALIASES = {
    "k": "K",
    "l": "L",
    "ortho": "Orthogonal",
    "orthogonal": "Orthogonal",
}


def normalize_kind(name):
    """Canonical projector kind for a user-supplied name"""
    kind = KIND_ALIASES.get(str(name).strip().lower())
    if kind is None:
        raise UsageError(f"unknown kernel {name!r}, expected one of K, L, ortho")
    return kind


@dataclass(frozen=True, eq=False)
class Projector:
    """
    Attributes:
        kind: "K", "L" or "Orthogonal"
        kv: knot vector of the target space S_m(kv)
        matrix: S or S_L (dense) for K and L, the banded Gramian for Orthogonal
        quad_points_per_span: Gauss points per integration subinterval, 2m+2 when omitted
    """
    kind: str
    kv: object
    matrix: object
    quad_points_per_span: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown projector kind {self.kind!r}, expected one of {KINDS}")
        if self.quad_points_per_span is None:
            object.__setattr__(self, "quad_points_per_span", 2 * self.kv.order + 2)
        if self.kind == "Orthogonal" and not isinstance(self.matrix, BandedSymMatrix):
            object.__setattr__(
                self, "matrix", BandedSymMatrix.from_dense(as_dense(self.matrix), self.kv.order - 1)
            )
        elif self.kind != "Orthogonal":
            object.__setattr__(self, "matrix", as_dense(self.matrix))

    @property
    def m(self):
        return self.kv.order


def make_projector(kind, kv, sel=None, method=DEFAULT_METHOD, tol=None, base=None):
    """
    Projector of the given kind on S_m(kv).

    Parameters:
    -----------
    kind : str
        Projector kind or one of its command-line aliases
    kv : KnotVector
    sel : CoarseSelection, optional
        Required for kind L
    method : str
        Right inverse of the enhancement ("a0" or "mp")
    base : ApproxDual, optional
        Approximate dual of kv, reused when given

    Returns:
    --------
    Projector
    """
    kind = normalize_kind(kind)
    if kind == "Orthogonal":
        return Projector(kind=kind, kv=kv, matrix=gram_matrix(kv))
    base = base if base is not None else approx_dual(kv, tol)
    if kind == "K":
        return Projector(kind=kind, kv=kv, matrix=base.matrix)
    if sel is None:
        raise UsageError("kernel L needs a coarse knot selection")
    enhanced = build_enhanced(base, sel, method=method, tol=tol)
    return Projector(kind=kind, kv=kv, matrix=enhanced.matrix)


def _subintervals(kv, breakpoints):
    cuts = [float(x) for x in breakpoints if kv.a < float(x) < kv.b]
    edges = np.union1d(kv.breakpoints, cuts)
    return zip(edges[:-1], edges[1:])


def _sample(f, xs):
    return np.broadcast_to(np.asarray(f(xs), dtype=float), xs.shape)


def moments(kv, f, breakpoints=(), points=None):
    """
    Moment vector g_k = int_a^b f(x) N_{m,k}(x) dx.

    Integration is spanwise Gauss-Legendre; spans are split at `breakpoints`,
    which must contain every non-smooth point of f inside (a, b).

    Parameters:
    -----------
    kv : KnotVector
    f : callable
        Vectorized integrand factor
    breakpoints : iterable of float
    points : int, optional
        Gauss points per subinterval, 2m+2 when omitted

    Returns:
    --------
    ndarray of length n
    """
    m = kv.order
    rule = gauss_legendre(points or 2 * m + 2)
    g = np.zeros(kv.n)
    for lo, hi in _subintervals(kv, breakpoints):
        xs, ws = rule.on_interval(lo, hi)
        span = kv.find_span(0.5 * (lo + hi))
        first, vals = span_basis(kv, m, span, xs)
        g[first:first + vals.shape[0]] += vals @ (ws * _sample(f, xs))
    return g


def project(p, f, breakpoints=()):
    """Spline approximation of f by the projector p"""
    g = moments(p.kv, f, breakpoints, p.quad_points_per_span)
    if p.kind == "Orthogonal":
        coeffs = cholesky_banded_solve(p.matrix, g)
    else:
        coeffs = p.matrix.T @ g
    return Spline(p.kv, p.m, coeffs)


def l2_error(f, s, breakpoints=(), points=None):
    """sqrt(int (f - s)^2) with 2m+4 Gauss points on every knot span, split at breakpoints"""
    kv = s.kv
    rule = gauss_legendre(points or 2 * kv.order + 4)
    total = 0.0
    for lo, hi in _subintervals(kv, breakpoints):
        xs, ws = rule.on_interval(lo, hi)
        diff = _sample(f, xs) - s(xs)
        total += float(ws @ (diff * diff))
    return float(np.sqrt(total))
