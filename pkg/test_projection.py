"""Tests for the quasi-projections, the orthogonal projection and L2 errors."""

import numpy as np
import numpy.testing as nptest
import pytest

from errors import UsageError
from knots import random_open_knots, refine_uniform, select_coarse, uniform_open_knots, validate
from linalg_utils import BandedSymMatrix
from projection import Projector, l2_error, make_projector, moments, normalize_kind, project


def _sup_error(f, s, kv, count=301):
    xs = np.linspace(kv.a, kv.b, count)
    return float(np.max(np.abs(f(xs) - s(xs))))


class TestKinds:

    @pytest.mark.parametrize("name, kind", [("K", "K"), ("l", "L"), ("ortho", "Orthogonal"), (" Orthogonal ", "Orthogonal")])
    def test_aliases(self, name, kind):
        assert normalize_kind(name) == kind

    def test_unknown_kind(self):
        with pytest.raises(UsageError):
            normalize_kind("spline")

    def test_kernel_L_needs_a_selection(self):
        with pytest.raises(UsageError, match="coarse knot selection"):
            make_projector("L", uniform_open_knots(3, 6))

    def test_orthogonal_stores_a_band(self):
        p = make_projector("ortho", uniform_open_knots(3, 6))
        assert isinstance(p.matrix, BandedSymMatrix)
        assert p.quad_points_per_span == 8


class TestMoments:

    def test_constant_gives_basis_integrals(self, rng):
        kv = random_open_knots(rng, 3, 7)
        t = kv.array
        g = moments(kv, lambda x: np.ones_like(x))
        nptest.assert_allclose(g, (t[3:3 + kv.n] - t[:kv.n]) / 3, atol=1e-14)

    def test_scalar_valued_function_is_broadcast(self):
        kv = uniform_open_knots(2, 4)
        nptest.assert_allclose(moments(kv, lambda x: 2.0), 2 * moments(kv, np.ones_like))


class TestReproduction:

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_kernel_K_reproduces_polynomials(self, rng, m):
        kv = random_open_knots(rng, m, 9)
        p = make_projector("K", kv)
        for power in range(m):
            f = lambda x, power=power: (x - 0.3) ** power
            assert _sup_error(f, project(p, f), kv) <= 1e-10

    def test_kernel_K_misses_a_kink(self):
        kv = uniform_open_knots(3, 8)
        f = lambda x: np.maximum(0.5 - x, 0.0) ** 2
        s = project(make_projector("K", kv), f, (0.5,))
        assert _sup_error(f, s, kv) > 1e-6

    @pytest.mark.parametrize("method", ["a0", "mp"])
    def test_kernel_L_reproduces_the_selected_truncated_powers(self, method):
        kv = uniform_open_knots(3, 8)
        sel = select_coarse(kv, [(0.5, 1)])
        p = make_projector("L", kv, sel=sel, method=method)
        f = lambda x: np.maximum(0.5 - x, 0.0) ** 2
        assert _sup_error(f, project(p, f, (0.5,)), kv) <= 1e-9

    def test_kernel_L_with_a_double_knot(self):
        kv = refine_uniform(validate([0, 0, 0, 0, 0.5, 0.5, 1, 1, 1, 1], 4), 4)
        sel = select_coarse(kv, [(0.5, 2)])
        p = make_projector("L", kv, sel=sel)
        for nu in range(2):
            f = lambda x, nu=nu: np.maximum(0.5 - x, 0.0) ** (3 - nu)
            assert _sup_error(f, project(p, f, (0.5,)), kv) <= 1e-9

    def test_kernel_L_is_not_symmetric(self):
        kv = uniform_open_knots(3, 8)
        p = make_projector("L", kv, sel=select_coarse(kv, [(0.5, 1)]))
        assert not np.allclose(p.matrix, p.matrix.T)
        # the transpose lands the moments on the wrong side and loses reproduction
        wrong = Projector(kind="L", kv=kv, matrix=p.matrix.T)
        f = lambda x: np.maximum(0.5 - x, 0.0) ** 2
        assert _sup_error(f, project(wrong, f, (0.5,)), kv) > 1e-7

    def test_orthogonal_reproduces_splines(self, rng):
        kv = random_open_knots(rng, 3, 6)
        knot = float(kv.breakpoints[3])
        f = lambda x: np.maximum(knot - x, 0.0) ** 2 + x
        s = project(make_projector("ortho", kv), f, kv.breakpoints)
        assert _sup_error(f, s, kv) <= 1e-10


class TestL2Error:

    def test_orthogonal_projection_of_a_parabola(self):
        kv = validate([0, 0, 1, 1], 2)
        s = project(make_projector("ortho", kv), lambda x: x ** 2)
        assert l2_error(lambda x: x ** 2, s) == pytest.approx(1 / np.sqrt(180), rel=1e-12)

    def test_zero_for_an_exact_spline(self):
        kv = uniform_open_knots(2, 5)
        s = project(make_projector("K", kv), lambda x: 3 * x - 1)
        assert l2_error(lambda x: 3 * x - 1, s) == pytest.approx(0.0, abs=1e-12)

    def test_breakpoints_resolve_a_kink(self):
        kv = uniform_open_knots(2, 3)
        f = lambda x: np.abs(x - 0.5)
        s = project(make_projector("ortho", kv), f, (0.5,))
        split = l2_error(f, s, (0.5,))
        assert split > 0.0
        assert split == pytest.approx(l2_error(f, s, (0.5,), points=20), rel=1e-10)
