"""
Open knot vectors, coarse-knot selections and uniform refinement.

Indices are 0-based throughout the code. In 1-based notation the knots are
theta_1..theta_{n+m}; here they are `kv.knots[0]..kv.knots[n+m-1]`, and the
B-spline N_{m,k} (1-based k) is basis function k-1.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from errors import (
    EndpointMultiplicity, InteriorMultiplicity, InvalidMultiplicity,
    MultiplicityExceeded, NotAnInteriorKnot, OrderOutOfRange, TooFewKnots,
    UnsortedKnots, ValidationError,
)

logger = logging.getLogger(__name__)


def max_interior_multiplicity(order):
    """Largest interior multiplicity a knot vector accepts; at multiplicity m the splines may jump"""
    return order


def max_smooth_multiplicity(order):
    """Largest interior multiplicity keeping the splines continuous (piecewise constants allow simple knots)"""
    return max(order - 1, 1)


@dataclass(frozen=True)
class KnotVector:
    """
    Open knot vector of order m.

    Attributes:
        order: spline order m (degree m-1)
        knots: non-decreasing knot values, m-fold at both endpoints,
            interior multiplicities at most m

    The spline space S_m(knots) has dimension n = len(knots) - m.
    """
    order: int
    knots: tuple

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(t) for t in self.knots))
        object.__setattr__(self, "order", int(self.order))
        self._validate()

    def _validate(self):
        m, t = self.order, self.knots
        if m < 1:
            raise OrderOutOfRange(f"order must be positive, got {m}")
        if len(t) < 2:
            raise TooFewKnots(f"a knot vector needs at least 2 knots, got {len(t)}")
        if any(t[i] > t[i + 1] for i in range(len(t) - 1)):
            raise UnsortedKnots("knot sequence must be non-decreasing")
        if not t[0] < t[-1]:
            raise TooFewKnots("knot vector spans an empty interval")
        counts = Counter(t)
        for end in (t[0], t[-1]):
            if counts[end] != m:
                raise EndpointMultiplicity(
                    f"endpoint {end!r} has multiplicity {counts[end]}, expected {m}"
                )
        limit = max_interior_multiplicity(m)
        for value, count in counts.items():
            if t[0] < value < t[-1] and count > limit:
                raise InteriorMultiplicity(
                    f"interior knot {value!r} has multiplicity {count}, at most {limit} allowed"
                )

    @property
    def n(self):
        return len(self.knots) - self.order

    @property
    def a(self):
        return self.knots[0]

    @property
    def b(self):
        return self.knots[-1]

    @cached_property
    def array(self):
        values = np.array(self.knots, dtype=float)
        values.flags.writeable = False
        return values

    @cached_property
    def breakpoints(self):
        """Distinct knot values in increasing order"""
        return np.unique(self.array)

    def multiplicity_of(self, value):
        return sum(1 for t in self.knots if t == value)

    def multiplicity(self, index):
        return self.multiplicity_of(self.knots[index])

    def first_occurrence(self, index):
        value = self.knots[index]
        while index > 0 and self.knots[index - 1] == value:
            index -= 1
        return index

    def is_interior(self, value):
        return self.a < value < self.b

    def spans(self):
        """Indices i of the non-empty spans [t_i, t_{i+1})"""
        t = self.knots
        return [i for i in range(self.order - 1, self.n) if t[i] < t[i + 1]]

    def find_span(self, x, side="right"):
        """
        Span index i with t_i <= x < t_{i+1} (side="right") or
        t_i < x <= t_{i+1} (side="left"). At x = b the last span is returned,
        at x = a the first one, whatever the side.
        """
        t = self.array
        m, n = self.order, self.n
        if side == "left":
            i = int(np.searchsorted(t, x, side="left")) - 1
        else:
            i = int(np.searchsorted(t, x, side="right")) - 1
        return min(max(i, m - 1), n - 1)

    def find_spans(self, xs, side="right"):
        """Vectorized find_span"""
        xs = np.asarray(xs, dtype=float)
        spans = np.searchsorted(self.array, xs, side=side) - 1
        return np.clip(spans, self.order - 1, self.n - 1)

    def greville(self, q=None):
        """Knot averages of the order-q B-splines (q >= m): one node per basis function"""
        q = self.order if q is None else q
        padded = padded_knots(self, q)
        count = self.n + self.order - q
        if q == 1:
            return 0.5 * (padded[:-1] + padded[1:])[:count]
        return np.array([padded[k + 1:k + q].mean() for k in range(count)])

    def __repr__(self):
        return f"KnotVector(order={self.order}, n={self.n}, knots={list(self.knots)})"


@dataclass(frozen=True)
class CoarseSelection:
    """
    Coarse knots theta_{l_j} with multiplicities mu_j selected inside a knot vector.

    `indices` are 0-based positions of the first occurrence of each selected
    value; `values` the knot values themselves.
    """
    indices: tuple
    multiplicities: tuple
    values: tuple

    @property
    def r(self):
        return len(self.indices)

    @property
    def r_tilde(self):
        return int(sum(self.multiplicities))

    def rows(self):
        """(index, nu) pairs in row order of A and B: knot by knot, nu ascending"""
        return [(ell, nu) for ell, mu in zip(self.indices, self.multiplicities) for nu in range(mu)]


def validate(knots, order):
    """
    Validate an open knot vector.

    Parameters:
    -----------
    knots : sequence of float
        Knot values theta_1..theta_{n+m}
    order : int
        Spline order m

    Returns:
    --------
    KnotVector
    """
    return KnotVector(order=order, knots=tuple(knots))


def refine_uniform(kv, N, interior_mult_at=()):
    """
    Insert the equidistant knots a + i*(b-a)/(2N), i = 1..2N-1.

    Existing knots are kept with their multiplicities; each value in
    `interior_mult_at` ends with at least the requested multiplicity. New knot
    values are generated directly from the integer grid, so refining with N
    and with 2N yields nested knot vectors with bit-identical shared values.
    """
    if N < 1:
        raise ValidationError(f"refinement level must be positive, got {N}")
    m, a, b = kv.order, kv.a, kv.b
    limit = max_smooth_multiplicity(m)
    counts = Counter(kv.knots)
    for i in range(1, 2 * N):
        value = a + (b - a) * i / (2 * N)
        counts[value] = max(counts[value], 1)
    for value, mult in interior_mult_at:
        if not 1 <= mult <= limit:
            raise InvalidMultiplicity(
                f"requested multiplicity {mult} at {value!r} outside 1..{limit} for order {m}"
            )
        if not a < value < b:
            raise NotAnInteriorKnot(f"{value!r} is not inside ({a!r}, {b!r})")
        counts[value] = max(counts[value], mult)
    refined = [value for value in sorted(counts) for _ in range(counts[value])]
    logger.debug("Refined order-%d knot vector with N=%d: n=%d", m, N, len(refined) - m)
    return KnotVector(order=m, knots=tuple(refined))


def select_coarse(kv, values):
    """
    Build a coarse selection from (knot value, multiplicity) pairs.

    Parameters:
    -----------
    kv : KnotVector
        Fine knot vector containing every selected value
    values : iterable of (float, int)
        Knot values and requested multiplicities mu_j

    Returns:
    --------
    CoarseSelection
        Entries sorted by knot value; indices point at first occurrences
    """
    chosen = sorted((float(v), int(mu)) for v, mu in values)
    seen = set()
    indices, mults, kept = [], [], []
    for value, mu in chosen:
        if value in seen:
            raise ValidationError(f"knot value {value!r} selected twice")
        seen.add(value)
        if not kv.is_interior(value) or kv.multiplicity_of(value) == 0:
            raise NotAnInteriorKnot(f"{value!r} is not an interior knot of the knot vector")
        available = kv.multiplicity_of(value)
        if mu < 1:
            raise InvalidMultiplicity(f"multiplicity at {value!r} must be positive, got {mu}")
        if mu > available:
            raise MultiplicityExceeded(
                f"requested multiplicity {mu} at {value!r} exceeds knot multiplicity {available}"
            )
        indices.append(kv.knots.index(value))
        mults.append(mu)
        kept.append(value)
    return CoarseSelection(indices=tuple(indices), multiplicities=tuple(mults), values=tuple(kept))


def padded_knots(kv, q):
    """Knots with q-m extra copies of each endpoint, for order-q B-splines on kv"""
    pad = q - kv.order
    if pad < 0:
        raise OrderOutOfRange(f"order {q} below knot vector order {kv.order}")
    if pad == 0:
        return kv.array
    return np.concatenate([np.full(pad, kv.a), kv.array, np.full(pad, kv.b)])


def uniform_open_knots(order, spans, a=0.0, b=1.0):
    """Open knot vector with `spans` equal spans and simple interior knots"""
    interior = [a + (b - a) * i / spans for i in range(1, spans)]
    return KnotVector(order=order, knots=(a,) * order + tuple(interior) + (b,) * order)


def geometric_open_knots(order, spans, ratio=1.2, a=0.0, b=1.0):
    """Open knot vector whose span lengths grow geometrically by `ratio`"""
    widths = ratio ** np.arange(spans)
    cuts = a + (b - a) * np.cumsum(widths)[:-1] / widths.sum()
    return KnotVector(order=order, knots=(a,) * order + tuple(cuts) + (b,) * order)


def random_open_knots(rng, order, spans, max_mult=None, a=0.0, b=1.0, spread=0.5):
    """
    Random open knot vector on [a, b].

    Span lengths are drawn from [1-spread, 1+spread] (then normalized) and each
    interior knot gets a random multiplicity in 1..max_mult.
    """
    limit = max_smooth_multiplicity(order)
    max_mult = limit if max_mult is None else min(max_mult, limit)
    widths = rng.uniform(1.0 - spread, 1.0 + spread, size=spans)
    cuts = a + (b - a) * np.cumsum(widths)[:-1] / widths.sum()
    mults = rng.integers(1, max_mult + 1, size=len(cuts))
    interior = [float(c) for c, k in zip(cuts, mults) for _ in range(int(k))]
    return KnotVector(order=order, knots=(a,) * order + tuple(interior) + (b,) * order)


def random_selection(rng, kv, count=2):
    """Random coarse selection of up to `count` distinct interior knots with random multiplicities"""
    interior = [v for v in kv.breakpoints if kv.is_interior(v)]
    if not interior:
        return CoarseSelection(indices=(), multiplicities=(), values=())
    picks = rng.choice(len(interior), size=min(count, len(interior)), replace=False)
    values = []
    for p in sorted(picks):
        value = float(interior[p])
        values.append((value, int(rng.integers(1, kv.multiplicity_of(value) + 1))))
    return select_coarse(kv, values)
