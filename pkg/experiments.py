"""
Convergence study on pullbacks along a spline interface curve.

A field u(x, y) = sin(a x) sin(b y) is pulled back along a quadratic spline
curve X(t) that is only C^1 at its interior knot. The pullbacks
u_hat = u o X and g_hat = grad u(X) . n lose smoothness at that knot, so a
quasi-projection that only reproduces polynomials (kernel K) converges at a
reduced rate, while the enhanced kernel L, built on the joint as a coarse
knot, keeps the full order m of the orthogonal projection.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from math import factorial

import numpy as np
import pandas as pd

from bspline import Spline, represent_in
from config import DEFAULT_LADDER, DEFAULT_METHOD, ERROR_FLOOR, get_worker_count
from curve_data import get_case_spec
from errors import OrderOutOfRange, UsageError
from gram_dual import approx_dual
from knots import KnotVector, refine_uniform, select_coarse
from projection import KINDS, l2_error, make_projector, normalize_kind, project

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["m", "case", "kernel", "N", "h", "l2_error", "slope"]


def field_value(x, y, frequencies=(3.0, 2.0)):
    a, b = frequencies
    return np.sin(a * x) * np.sin(b * y)


def field_gradient(x, y, frequencies=(3.0, 2.0)):
    """Analytic gradient of sin(a x) sin(b y)"""
    a, b = frequencies
    return (a * np.cos(a * x) * np.sin(b * y), b * np.sin(a * x) * np.cos(b * y))


@dataclass(frozen=True, eq=False)
class TestCase:
    """
    One pullback on one spline order.

    Attributes:
        name: "u_hat" or "g_hat"
        m: spline order of the approximation spaces
        kv0: coarse knot vector of order m, the joint at multiplicity coarse_mult
        curve: (x(t), y(t)) represented exactly in S_m(kv0)
        coarse_mult: multiplicity of the joint in kv0 and in the kernel-L selection
        pullback_kind: "value" or "normal_derivative"
        frequencies: (a, b) of the field
        joint: interior knot where the pullback loses smoothness
    """
    __test__ = False

    name: str
    m: int
    kv0: KnotVector
    curve: tuple
    coarse_mult: int
    pullback_kind: str
    frequencies: tuple
    joint: float

    @property
    def breakpoints(self):
        return (self.joint,)

    def pullback(self, t, side="right"):
        """Pullback at t; side="left" takes left limits at knots"""
        cx, cy = self.curve
        x, y = cx(t, 0, side), cy(t, 0, side)
        if self.pullback_kind == "value":
            return field_value(x, y, self.frequencies)
        dx, dy = cx(t, 1, side), cy(t, 1, side)
        ux, uy = field_gradient(x, y, self.frequencies)
        # X' rotated by +90 degrees
        return (-ux * dy + uy * dx) / np.hypot(dx, dy)

    def refined(self, N):
        """Knot vector with h = 1/(2N) that keeps the joint multiplicity"""
        return refine_uniform(self.kv0, N)

    def selection(self, kv):
        """Coarse selection of the joint on a refined knot vector"""
        return select_coarse(kv, [(self.joint, self.coarse_mult)])


def build_case(name, m, tol=None):
    """
    Test case `name` for spline order m.

    The quadratic curve from the case table is re-represented in S_m(kv0),
    where the joint keeps multiplicity m - 2 (u_hat) or m - 1 (g_hat).
    """
    spec = get_case_spec(name)
    if m not in spec["orders"]:
        raise OrderOutOfRange(f"case {name!r} supports orders {spec['orders']}, got {m}")
    curve_spec = spec["curve_spec"]
    base_kv = KnotVector(order=curve_spec["order"], knots=curve_spec["knots"])
    points = np.array(curve_spec["control_points"], dtype=float)
    joint = float(curve_spec["joint"])
    mult = m - spec["coarse_mult_offset"]
    kv0 = KnotVector(order=m, knots=(base_kv.a,) * m + (joint,) * mult + (base_kv.b,) * m)
    curve = tuple(
        represent_in(kv0, m, Spline(base_kv, base_kv.order, points[:, axis]), tol) for axis in (0, 1)
    )
    return TestCase(
        name=name, m=m, kv0=kv0, curve=curve, coarse_mult=mult,
        pullback_kind=spec["pullback"], frequencies=tuple(spec["frequencies"]), joint=joint,
    )


@dataclass(frozen=True)
class ConvergenceRecord:
    m: int
    case: str
    kernel: str
    N: int
    h: float
    l2_error: float
    slope: float = None


def _level_errors(case, kernels, N, method, tol):
    kv = case.refined(N)
    base = approx_dual(kv, tol) if set(kernels) & {"K", "L"} else None
    sel = case.selection(kv) if "L" in kernels else None
    errors = {}
    for kernel in kernels:
        p = make_projector(kernel, kv, sel=sel, method=method, tol=tol, base=base)
        s = project(p, case.pullback, case.breakpoints)
        errors[kernel] = l2_error(case.pullback, s, case.breakpoints)
    logger.debug("%s m=%d N=%d: %s", case.name, case.m, N, errors)
    return errors


def run_ladder(case, kernels=KINDS, levels=DEFAULT_LADDER, method=DEFAULT_METHOD, workers=None, tol=None):
    """
    L2 errors of every kernel on the refinement ladder.

    Parameters:
    -----------
    case : TestCase
    kernels : iterable of str
        Projector kinds or their aliases
    levels : sequence of int
        Increasing refinement levels N
    workers : int, optional
        Threads for independent levels; ADUALS_WORKERS when omitted

    Returns:
    --------
    list of ConvergenceRecord
        Grouped by kernel, ordered by N; slope = log(e_prev/e) / log(N/N_prev)
    """
    kernels = [normalize_kind(k) for k in kernels]
    levels = [int(N) for N in levels]
    if not levels or levels[0] < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise UsageError(f"levels must be increasing positive integers, got {levels}")
    workers = workers or get_worker_count()

    def job(N):
        return _level_errors(case, kernels, N, method, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, levels))
    else:
        results = [job(N) for N in levels]

    records = []
    for kernel in kernels:
        previous = None
        for N, errors in zip(levels, results):
            error = errors[kernel]
            slope = None
            if previous is not None:
                slope = float(np.log(previous[1] / error) / np.log(N / previous[0]))
            records.append(ConvergenceRecord(
                m=case.m, case=case.name, kernel=kernel, N=N, h=1.0 / (2 * N), l2_error=error, slope=slope,
            ))
            previous = (N, error)
    logger.debug(
        "Ladder %s m=%d: %s",
        case.name, case.m, ", ".join(f"{r.kernel}@{r.N}={r.l2_error:.3e}" for r in records if r.N == levels[-1]),
    )
    return records


def records_frame(records):
    """Convergence records as a DataFrame with the CSV column order"""
    df = pd.DataFrame([asdict(r) for r in records], columns=RECORD_COLUMNS)
    # first level has no slope
    df["slope"] = df["slope"].astype(float)
    return df


def resolved(records, floor=ERROR_FLOOR):
    """
    Records whose error is above the round-off floor.

    Each (m, case, kernel) series is cut at its first level at or below
    `floor`, so every kept slope compares two resolved errors. Series must be
    ordered by N, as run_ladder returns them.
    """
    cut, kept = set(), []
    for r in records:
        key = (r.m, r.case, r.kernel)
        if key in cut or not r.l2_error > floor:
            cut.add(key)
            continue
        kept.append(r)
    if len(kept) < len(records):
        logger.info(
            "Dropped %d of %d records at or below the error floor %.1e", len(records) - len(kept), len(records), floor,
        )
    return kept


def slope_summary(records, floor=ERROR_FLOOR):
    """
    Terminal slope per (m, case, kernel) over the resolved levels.

    The column l_over_orthogonal holds error(L)/error(Orthogonal) on the
    last level where both are resolved, as a diagnostic.
    """
    records = resolved(records, floor)
    df = records_frame(records)
    terminal = df.sort_values("N", kind="stable").groupby(["m", "case", "kernel"], sort=False).tail(1)
    summary = terminal.rename(columns={"slope": "terminal_slope"})[
        ["m", "case", "kernel", "N", "l2_error", "terminal_slope"]
    ].reset_index(drop=True)
    ratios = error_ratios(records)
    if ratios.empty:
        summary["l_over_orthogonal"] = np.nan
        return summary
    last = ratios.sort_values("N", kind="stable").groupby(["m", "case"]).tail(1)[["m", "case", "l_over_orthogonal"]]
    return summary.merge(last, on=["m", "case"], how="left")


def error_ratios(records):
    """error(L)/error(Orthogonal) per (m, case, N) where both kernels were run"""
    df = records_frame(records)
    wide = df.pivot_table(index=["m", "case", "N"], columns="kernel", values="l2_error")
    if "L" not in wide.columns or "Orthogonal" not in wide.columns:
        return pd.DataFrame(columns=["m", "case", "N", "l_over_orthogonal"])
    wide["l_over_orthogonal"] = wide["L"] / wide["Orthogonal"]
    return wide.reset_index()[["m", "case", "N", "l_over_orthogonal"]].dropna(subset=["l_over_orthogonal"])


def normal_derivative_check(case, delta=1e-6):
    """
    One-sided behaviour of the pullback at the joint.

    Returns:
    --------
    dict
        value_jump: |f(joint+) - f(joint-)|
        derivative_jump: |f'(joint+) - f'(joint-)| from one-sided differences with step delta
        tangent_angle: angle between the one-sided unit tangents of the curve
    """
    f, t = case.pullback, case.joint
    left, right = float(f(t, side="left")), float(f(t, side="right"))
    slope_left = (left - float(f(t - delta))) / delta
    slope_right = (float(f(t + delta)) - right) / delta
    tangents = []
    for side in ("left", "right"):
        d = np.array([c(t, 1, side) for c in case.curve])
        tangents.append(d / np.linalg.norm(d))
    cosine = float(np.clip(tangents[0] @ tangents[1], -1.0, 1.0))
    return {
        "left_value": left,
        "right_value": right,
        "value_jump": abs(right - left),
        "derivative_jump": abs(slope_right - slope_left),
        "tangent_angle": float(np.arccos(cosine)),
    }


# Truncated power series in s = t - joint; arrays hold the first K coefficients.

def _series_mul(p, q):
    return np.convolve(p, q)[:p.size]


def _series_derivative(p):
    return p[1:] * np.arange(1, p.size)


def _series_sincos(z):
    """sin(z) and cos(z) from S' = C z', C' = -S z'"""
    K = z.size
    S, C = np.zeros(K), np.zeros(K)
    S[0], C[0] = np.sin(z[0]), np.cos(z[0])
    for k in range(1, K):
        j = np.arange(1, k + 1)
        S[k] = np.sum(j * z[j] * C[k - j]) / k
        C[k] = -np.sum(j * z[j] * S[k - j]) / k
    return S, C


def _series_power(q, alpha):
    """q^alpha for q[0] > 0 from r' q = alpha q' r"""
    K = q.size
    r = np.zeros(K)
    r[0] = q[0] ** alpha
    for k in range(1, K):
        j = np.arange(1, k + 1)
        r[k] = np.sum((alpha * j - (k - j)) * q[j] * r[k - j]) / (k * q[0])
    return r


@dataclass(frozen=True, eq=False)
class BentDecomposition:
    """
    Pullback = smooth remainder + coarse spline part at the joint.

    left/right are the one-sided Taylor coefficients a_nu (nu < m) at the
    joint and jumps = right - left. The spline part
    sum_{nu >= m - coarse_mult} jumps[nu] (t - joint)_+^nu carries every jump
    the coarse knot admits; the remainder is C^{m-1}.
    """
    case: TestCase
    left: np.ndarray
    right: np.ndarray

    @property
    def jumps(self):
        return self.right - self.left

    @property
    def first_power(self):
        return self.case.m - self.case.coarse_mult

    def spline_part(self, t):
        shifted = np.maximum(np.asarray(t, dtype=float) - self.case.joint, 0.0)
        total = np.zeros_like(shifted)
        for nu in range(self.first_power, self.case.m):
            total = total + self.jumps[nu] * shifted ** nu
        return total

    def remainder(self, t):
        return self.case.pullback(t) - self.spline_part(t)


def _pullback_series(case, side):
    m, t = case.m, case.joint
    # the curve is piecewise polynomial of degree < m: coefficient m vanishes
    coords = []
    for c in case.curve:
        series = np.zeros(m + 1)
        for nu in range(m):
            series[nu] = c(t, nu, side) / factorial(nu)
        coords.append(series)
    x, y = coords
    a, b = case.frequencies
    sin_ax, cos_ax = _series_sincos(a * x[:m])
    sin_by, cos_by = _series_sincos(b * y[:m])
    if case.pullback_kind == "value":
        return _series_mul(sin_ax, sin_by)
    dx, dy = _series_derivative(x), _series_derivative(y)
    ux = a * _series_mul(cos_ax, sin_by)
    uy = b * _series_mul(sin_ax, cos_by)
    inv_speed = _series_power(_series_mul(dx, dx) + _series_mul(dy, dy), -0.5)
    return _series_mul(_series_mul(uy, dx) - _series_mul(ux, dy), inv_speed)


def bent_decomposition(case):
    """Split the pullback into a C^{m-1} part and a spline on the coarse knot vector"""
    left = _pullback_series(case, "left")
    right = _pullback_series(case, "right")
    decomposition = BentDecomposition(case=case, left=left, right=right)
    logger.debug("%s m=%d: Taylor jumps at the joint %s", case.name, case.m, decomposition.jumps)
    return decomposition
