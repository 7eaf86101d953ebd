"""Tests for the enhancement system A U = B, the right inverses and the kernel L."""

import numpy as np
import numpy.testing as nptest
import pytest

from bspline import marsden_coeffs
from enhanced import (
    METHODS, a0_columns, build_A, build_B, build_enhanced, kernel_L_eval, pattern_range,
    realized_bandwidth, right_inverse, truncated_power_residual,
)
from errors import UsageError
from gram_dual import approx_dual, kernel_K_eval
from knots import select_coarse, uniform_open_knots, validate


@pytest.fixture
def example_dual(example_kv):
    return approx_dual(example_kv)


class TestCollocationRows:

    def test_worked_example(self, example_kv, example_sel):
        A = build_A(example_kv, example_sel).toarray()
        expected = np.zeros((3, 12))
        expected[0, 0:4] = [0, 1 / 6, 4 / 6, 1 / 6]
        expected[1, 7:9] = [0.5, 0.5]
        expected[2, 7:9] = [-1.5, 1.5]
        nptest.assert_allclose(A, expected, atol=1e-14)

    def test_a0_columns(self, example_sel):
        assert a0_columns(example_sel, 2) == [2, 7, 8]

    def test_moore_penrose_inverse(self, example_kv, example_sel):
        A = build_A(example_kv, example_sel)
        R = right_inverse(A, "mp", example_sel, 2).matrix
        expected = np.zeros((12, 3))
        expected[0:4, 0] = np.array([0, 1, 4, 1]) / 3
        expected[7:9, 1] = [1, 1]
        expected[7:9, 2] = [-1 / 3, 1 / 3]
        nptest.assert_allclose(R, expected, atol=1e-12)

    def test_a0_inverse(self, example_kv, example_sel):
        A = build_A(example_kv, example_sel)
        inverse = right_inverse(A, "a0", example_sel, 2)
        R = inverse.matrix
        nptest.assert_allclose(R[2], [1.5, 0, 0], atol=1e-12)
        nptest.assert_allclose(R[7], [0, 1, -1 / 3], atol=1e-12)
        nptest.assert_allclose(R[8], [0, 1, 1 / 3], atol=1e-12)
        others = np.delete(R, [2, 7, 8], axis=0)
        assert not np.any(others)
        assert inverse.condition >= 1.0

    def test_unknown_method(self, example_kv, example_sel):
        with pytest.raises(UsageError):
            right_inverse(build_A(example_kv, example_sel), "qr", example_sel, 2)


class TestRightHandSide:

    def test_simple_knot_row(self, example_kv, example_sel, example_dual):
        B = build_B(example_kv, example_dual.matrix, example_sel, example_dual.gram_matrix, validate="all").toarray()
        expected = np.zeros(12)
        expected[2] = 1 / 36
        nptest.assert_allclose(B[0], expected, atol=1e-12)

    def test_rows_vanish_at_a_full_multiplicity_knot(self, example_kv, example_sel, example_dual):
        B = build_B(example_kv, example_dual.matrix, example_sel, example_dual.gram_matrix, validate="all").toarray()
        nptest.assert_allclose(B[1:], 0.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_any_cross_checked_row(self, example_kv, example_sel, example_dual, seed):
        B = build_B(
            example_kv, example_dual.matrix, example_sel, example_dual.gram_matrix, validate="one", seed=seed,
        ).toarray()
        assert B[0, 2] == pytest.approx(1 / 36, abs=1e-12)
        nptest.assert_allclose(B[1:], 0.0, atol=1e-12)

    @pytest.mark.parametrize("m", [3, 4])
    def test_full_multiplicity_knot(self, m):
        kv = validate((0,) * m + (0.25,) + (0.5,) * m + (0.75,) + (1,) * m, m)
        sel = select_coarse(kv, [(0.5, m)])
        ad = approx_dual(kv)
        B = build_B(kv, ad.matrix, sel, ad.gram_matrix, validate="all").toarray()
        first, last = pattern_range(kv, sel.indices[0])
        ks = np.arange(B.shape[1])
        assert not np.any(B[:, (ks < first) | (ks > last)])

    def test_pattern_range(self, example_kv):
        assert pattern_range(example_kv, 4) == (2, 2)
        first, last = pattern_range(example_kv, 9)
        assert first > last

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    def test_full_cross_check(self, random_cases, m):
        for kv, sel in random_cases(m, count=2):
            ad = approx_dual(kv)
            B = build_B(kv, ad.matrix, sel, ad.gram_matrix, validate="all").toarray()
            for row, (ell, _) in zip(B, sel.rows()):
                first, last = pattern_range(kv, ell)
                ks = np.arange(row.size)
                assert not np.any(row[(ks < first) | (ks > last)])


class TestEnhancedDual:

    @pytest.mark.parametrize("method", METHODS)
    def test_worked_example(self, example_dual, example_sel, method):
        ed = build_enhanced(example_dual, example_sel, method=method)
        nptest.assert_allclose(ed.A.toarray() @ ed.U.toarray(), ed.B.toarray(), atol=1e-12)
        assert ed.matrix.shape == (14, 14)

    def test_a0_keeps_the_enhancement_local(self, example_dual, example_sel):
        ed = build_enhanced(example_dual, example_sel, method="a0")
        # U has a single nonzero entry: kappa / A[0, 2] at (2, 2)
        nptest.assert_allclose(ed.U.toarray()[2, 2], 1.5 / 36, atol=1e-12)
        assert ed.U.nnz == 1
        assert ed.bandwidth == 2

    @pytest.mark.parametrize("m", [2, 3, 4])
    @pytest.mark.parametrize("method", METHODS)
    def test_reproduces_polynomials_and_truncated_powers(self, random_cases, m, method):
        for kv, sel in random_cases(m, count=2):
            ed = build_enhanced(kv, sel, method=method)
            gram = ed.base.gram_matrix
            for nu in range(m):
                c = marsden_coeffs(kv, nu, 0.37)
                residual = c - (c @ gram) @ ed.matrix
                assert np.max(np.abs(residual)) <= 1e-8 * np.max(np.abs(c))
            assert truncated_power_residual(kv, sel, ed.S_L, gram) <= 1e-8

    def test_kernel_L_differs_from_K_only_near_the_knot(self):
        kv = uniform_open_knots(3, 16)
        sel = select_coarse(kv, [(0.5, 1)])
        ed = build_enhanced(kv, sel)
        far = (0.05, 0.1)
        assert kernel_L_eval(ed, *far) == pytest.approx(kernel_K_eval(ed.base, *far), abs=1e-12)
        grid = np.linspace(0.35, 0.65, 7)
        gap = max(abs(kernel_L_eval(ed, x, y) - kernel_K_eval(ed.base, x, y)) for x in grid for y in grid)
        assert gap > 1e-6

    def test_bandwidth_measure(self):
        assert realized_bandwidth(np.diag([1.0, 2.0]) + np.diag([3.0], 1)) == 1
