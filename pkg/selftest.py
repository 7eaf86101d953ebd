"""
Randomized property suite over the whole construction.

Every check runs on the same seeded set of random knot vectors and coarse
selections (orders 2..6) and reports the worst residual it saw.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from bspline import basis_matrix, derivative_chain, marsden_coeffs
from config import DEFAULT_SEED, get_tolerances
from enhanced import METHODS, a0_columns, build_A, build_B, build_enhanced, pattern_range, truncated_power_residual
from errors import ApproxDualError
from gram_dual import approx_dual, kernel_K_eval
from knots import random_open_knots, random_selection

logger = logging.getLogger(__name__)

SELFTEST_ORDERS = (2, 3, 4, 5, 6)


@dataclass(eq=False)
class _Context:
    kv: object
    sel: object
    rng: np.random.Generator
    tol: object
    _cache: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.kv.order

    @property
    def dual(self):
        if "dual" not in self._cache:
            self._cache["dual"] = approx_dual(self.kv, self.tol)
        return self._cache["dual"]

    def enhanced(self, method):
        key = ("enhanced", method)
        if key not in self._cache:
            self._cache[key] = build_enhanced(self.dual, self.sel, method=method, tol=self.tol, validate="none")
        return self._cache[key]

    def points(self, count=40):
        inner = self.rng.uniform(self.kv.a, self.kv.b, size=count)
        return np.concatenate([inner, self.kv.breakpoints])


def check_partition_of_unity(ctx):
    """sum_k N_{q,k} = 1 on [t_{q-1}, t_{n+m-q}] for q = m..2m"""
    kv, m = ctx.kv, ctx.m
    t, xs = kv.array, ctx.points()
    worst = 0.0
    for q in range(m, 2 * m + 1):
        lo, hi = t[q - 1], t[kv.n + m - q]
        inside = xs[(xs >= lo) & (xs <= hi)]
        if lo < hi and inside.size:
            sums = basis_matrix(kv, q, inside).sum(axis=1)
            worst = max(worst, float(np.max(np.abs(sums - 1.0))))
    return worst, ctx.tol.consistency


def check_derivative_recursion(ctx):
    """nu-th derivative of the order-(m+nu) row = order-m row times (D_{m+nu-1}...D_m)^T"""
    kv, m = ctx.kv, ctx.m
    xs = ctx.points()
    base = basis_matrix(kv, m, xs)
    worst = 0.0
    for nu in range(1, m + 1):
        lhs = basis_matrix(kv, m + nu, xs, nu)
        rhs = base @ derivative_chain(kv, m + nu - 1).T
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs)))))
    return worst, ctx.tol.consistency


def check_support_localization(ctx):
    """K(x, y) = 0 once y lies 2m-1 knots beyond the span of x"""
    kv, m = ctx.kv, ctx.m
    t = kv.array
    worst = 0.0
    for x in ctx.points(20):
        edge_index = kv.find_span(x) + 2 * m - 1
        if edge_index >= t.size or t[edge_index] >= kv.b:
            continue
        for y in ctx.rng.uniform(t[edge_index], kv.b, size=3):
            worst = max(worst, abs(kernel_K_eval(ctx.dual, x, y)), abs(kernel_K_eval(ctx.dual, y, x)))
    return worst, ctx.tol.consistency


def check_full_rank(ctx):
    """A has full row rank and the square column block A_0 has positive determinant"""
    A = build_A(ctx.kv, ctx.sel).toarray()
    r = A.shape[0]
    rank = np.linalg.matrix_rank(A)
    if rank < r:
        return np.inf, ctx.tol.right_inverse, f"rank {rank} < {r}"
    det = np.linalg.det(A[:, a0_columns(ctx.sel, ctx.m)])
    if not det > 0:
        return np.inf, ctx.tol.right_inverse, f"det A_0 = {det:.3e}"
    R = ctx.enhanced("a0").R
    return float(np.max(np.abs(A @ R - np.eye(r)), initial=0.0)), ctx.tol.right_inverse


def check_b_zero_pattern(ctx):
    """Rows of B vanish outside their pattern, cross-checked over the full index range"""
    kv, sel = ctx.kv, ctx.sel
    dual = ctx.dual
    B = build_B(kv, dual.matrix, sel, dual.gram_matrix, ctx.tol, validate="all").toarray()
    worst = 0.0
    for row, (ell, _) in zip(B, sel.rows()):
        first, last = pattern_range(kv, ell)
        ks = np.arange(row.size)
        outside = row[(ks < first) | (ks > last)]
        worst = max(worst, float(np.max(np.abs(outside), initial=0.0)))
    return worst, ctx.tol.zero_pattern


def check_au_equals_b(ctx):
    worst = 0.0
    for method in METHODS:
        ed = ctx.enhanced(method)
        A, U, B = ed.A.toarray(), ed.U.toarray(), ed.B.toarray()
        scale = max(1.0, float(np.max(np.abs(B), initial=0.0)))
        worst = max(worst, float(np.max(np.abs(A @ U - B), initial=0.0)) / scale)
    return worst, ctx.tol.right_inverse


def _polynomial_residual(ctx, matrix):
    kv, m = ctx.kv, ctx.m
    gram = ctx.dual.gram_matrix
    worst = 0.0
    for center in ctx.rng.uniform(kv.a, kv.b, size=3):
        for nu in range(m):
            c = marsden_coeffs(kv, nu, center)
            residual = c - (c @ gram) @ matrix
            worst = max(worst, float(np.max(np.abs(residual)) / np.max(np.abs(c))))
    return worst


def check_k_reproduction(ctx):
    """Kernel K reproduces every polynomial of degree < m"""
    return _polynomial_residual(ctx, ctx.dual.matrix), ctx.tol.kernel_reproduction


def check_l_reproduction(ctx):
    """Kernel L reproduces polynomials and the selected truncated powers, for both right inverses"""
    worst = 0.0
    for method in METHODS:
        ed = ctx.enhanced(method)
        worst = max(
            worst,
            _polynomial_residual(ctx, ed.matrix),
            truncated_power_residual(ctx.kv, ctx.sel, ed.matrix, ctx.dual.gram_matrix),
        )
    return worst, ctx.tol.enhanced_reproduction


CHECKS = {
    "partition_of_unity": check_partition_of_unity,
    "derivative_recursion": check_derivative_recursion,
    "support_localization": check_support_localization,
    "full_rank_det_a0": check_full_rank,
    "b_zero_pattern": check_b_zero_pattern,
    "au_equals_b": check_au_equals_b,
    "k_reproduction": check_k_reproduction,
    "l_reproduction": check_l_reproduction,
}


def _contexts(seed, orders, per_order, tol):
    rng = np.random.default_rng(seed)
    for m in orders:
        for _ in range(per_order):
            kv = random_open_knots(rng, m, int(rng.integers(2 * m + 2, 3 * m + 4)))
            yield _Context(kv=kv, sel=random_selection(rng, kv, count=2), rng=rng, tol=tol)


def run_selftest(seed=DEFAULT_SEED, tol=None, orders=SELFTEST_ORDERS, per_order=3):
    """
    Run every property check on a seeded randomized set of cases.

    Returns:
    --------
    pandas.DataFrame
        One row per check: check, passed, worst, threshold, cases, seconds, detail
    """
    tol = tol or get_tolerances()
    totals = {
        name: {"worst": 0.0, "threshold": None, "cases": 0, "seconds": 0.0, "detail": ""}
        for name in CHECKS
    }
    for ctx in _contexts(seed, orders, per_order, tol):
        for name, check in CHECKS.items():
            entry = totals[name]
            started = time.perf_counter()
            try:
                worst, threshold, *detail = check(ctx)
            except ApproxDualError as e:
                worst, threshold, detail = np.inf, None, [e.diagnostic()]
            entry["seconds"] += time.perf_counter() - started
            entry["cases"] += 1
            if threshold is not None:
                entry["threshold"] = threshold
            if worst > entry["worst"]:
                entry["worst"] = worst
            if detail and not entry["detail"]:
                entry["detail"] = f"order {ctx.m}: {detail[0]}"
        logger.debug("selftest: finished %r", ctx.kv)

    rows = []
    for name, entry in totals.items():
        threshold = entry["threshold"] if entry["threshold"] is not None else 0.0
        rows.append({
            "check": name,
            "passed": bool(np.isfinite(entry["worst"]) and entry["worst"] <= threshold),
            "worst": entry["worst"],
            "threshold": threshold,
            "cases": entry["cases"],
            "seconds": entry["seconds"],
            "detail": entry["detail"],
        })
    return pd.DataFrame(rows)
