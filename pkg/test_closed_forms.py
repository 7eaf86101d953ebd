"""Closed forms for linear and quadratic splines checked against the generic construction."""

import numpy as np
import numpy.testing as nptest
import pytest

from bspline import derivative_chain
from closed_forms import (
    closed_form_m3, gram_matrix_m2, kappa_m2, kernel_L_m2_separated, s_matrix_m2, w_row_m3,
    z_matrix_m2,
)
from enhanced import build_B, build_enhanced, kernel_L_eval
from errors import MultipleKnot, WrongOrder
from gram_dual import approx_dual
from knots import random_open_knots, select_coarse, validate


def _integer_knots(m, last):
    return validate((0,) * m + tuple(range(1, last)) + (last,) * m, m)


class TestLinear:

    def test_kappa_uniform(self, example_kv):
        assert kappa_m2(example_kv, 4) == pytest.approx(1 / 36)

    def test_factorization(self, rng):
        kv = random_open_knots(rng, 2, 10)
        ad = approx_dual(kv)
        lhs = np.eye(kv.n) - ad.gram_matrix @ ad.matrix
        nptest.assert_allclose(lhs, z_matrix_m2(kv) @ derivative_chain(kv, 3), atol=1e-11)

    def test_b_rows_are_kappa(self, rng):
        kv = random_open_knots(rng, 2, 10)
        interior = kv.breakpoints[2:-2:3]
        sel = select_coarse(kv, [(v, 1) for v in interior])
        ad = approx_dual(kv)
        B = build_B(kv, ad.matrix, sel, ad.gram_matrix, validate="all").toarray()
        for row, ell in zip(B, sel.indices):
            expected = np.zeros(kv.n - 2)
            expected[ell - 2] = kappa_m2(kv, ell)
            nptest.assert_allclose(row, expected, atol=1e-12 * max(1.0, kappa_m2(kv, ell)))

    def test_explicit_matrices(self, rng):
        kv = random_open_knots(rng, 2, 8)
        ad = approx_dual(kv)
        nptest.assert_allclose(gram_matrix_m2(kv), ad.gram_matrix, atol=1e-15)
        nptest.assert_allclose(s_matrix_m2(kv), ad.matrix, rtol=1e-10, atol=1e-10)

    def test_separated_kernel(self):
        kv = _integer_knots(2, 12)
        sel = select_coarse(kv, [(3, 1), (7, 1)])
        ed = build_enhanced(kv, sel, method="a0")
        for x, y in [(2.5, 3.2), (6.1, 7.9), (3.0, 3.0), (1.0, 10.5)]:
            assert kernel_L_eval(ed, x, y) == pytest.approx(
                kernel_L_m2_separated(ed.base, sel, x, y), rel=1e-9, abs=1e-10
            )

    def test_wrong_order(self):
        with pytest.raises(WrongOrder):
            kappa_m2(_integer_knots(3, 6), 4)


class TestQuadratic:

    def test_uniform_values(self):
        kv = _integer_knots(3, 12)
        mu, kappa, nu = closed_form_m3(kv, 8)
        assert mu == pytest.approx(13 / 14400)
        assert kappa == pytest.approx(912 / 43200)
        assert nu == pytest.approx(13 / 14400)

    def test_uniform_b_row(self):
        kv = _integer_knots(3, 12)
        sel = select_coarse(kv, [(6, 1)])
        ad = approx_dual(kv)
        B = build_B(kv, ad.matrix, sel, ad.gram_matrix, validate="all").toarray()
        nptest.assert_allclose(B[0], w_row_m3(kv, 8), atol=1e-12)

    def test_graded_b_row(self, rng):
        kv = random_open_knots(rng, 3, 12, max_mult=1)
        value = kv.breakpoints[6]
        sel = select_coarse(kv, [(value, 1)])
        ell = sel.indices[0]
        ad = approx_dual(kv)
        B = build_B(kv, ad.matrix, sel, ad.gram_matrix).toarray()
        expected = w_row_m3(kv, ell)
        nptest.assert_allclose(B[0], expected, rtol=1e-7, atol=1e-9 * np.max(np.abs(expected)))

    def test_multiple_knot_rejected(self):
        kv = validate([0, 0, 0, 1, 2, 2, 3, 4, 4, 4], 3)
        with pytest.raises(MultipleKnot):
            closed_form_m3(kv, 4)
