"""Tests for the pullback test cases, the bent decomposition and the refinement ladder."""

from functools import lru_cache

import numpy as np
import numpy.testing as nptest
import pytest

from config import DEFAULT_LADDER, EXTENDED_LADDER
from curve_data import get_case_spec, test_cases as case_table
from errors import OrderOutOfRange, UsageError
from experiments import (
    ConvergenceRecord, RECORD_COLUMNS, bent_decomposition, build_case, error_ratios,
    normal_derivative_check, records_frame, resolved, run_ladder, slope_summary,
)
from projection import make_projector, project


class TestCases:

    def test_case_table(self):
        assert set(case_table) == {"u_hat", "g_hat"}
        spec = get_case_spec("g_hat")
        assert spec["curve_spec"]["joint"] == 0.5

    def test_unknown_case(self):
        with pytest.raises(UsageError):
            get_case_spec("h_hat")

    def test_order_out_of_range(self):
        with pytest.raises(OrderOutOfRange):
            build_case("u_hat", 2)

    @pytest.mark.parametrize("name, offset", [("u_hat", 2), ("g_hat", 1)])
    def test_joint_multiplicity(self, name, offset):
        case = build_case(name, 5)
        assert case.kv0.multiplicity_of(0.5) == 5 - offset
        assert case.coarse_mult == 5 - offset
        assert case.refined(4).multiplicity_of(0.5) == 5 - offset

    def test_curve_passes_through_control_endpoints(self):
        case = build_case("u_hat", 4)
        cx, cy = case.curve
        assert (cx(0.0), cy(0.0)) == pytest.approx((0.5, 0.0))
        assert (cx(1.0), cy(1.0)) == pytest.approx((0.5, 1.0))
        assert (cx(0.5), cy(0.5)) == pytest.approx((0.5, 0.5))

    def test_value_pullback(self):
        case = build_case("u_hat", 3)
        assert case.pullback(0.0) == pytest.approx(0.0, abs=1e-12)
        assert case.pullback(0.5) == pytest.approx(np.sin(1.5) * np.sin(1.0))

    def test_selection_on_refined_knots(self):
        case = build_case("g_hat", 4)
        kv = case.refined(8)
        sel = case.selection(kv)
        assert sel.values == (0.5,)
        assert sel.multiplicities == (3,)


class TestJointBehaviour:

    def test_value_pullback_is_C1(self):
        check = normal_derivative_check(build_case("u_hat", 3))
        assert check["value_jump"] == pytest.approx(0.0, abs=1e-12)
        assert check["derivative_jump"] < 1e-4
        assert check["tangent_angle"] == pytest.approx(0.0, abs=1e-6)

    def test_normal_derivative_has_a_kink(self):
        check = normal_derivative_check(build_case("g_hat", 3))
        assert check["value_jump"] == pytest.approx(0.0, abs=1e-12)
        assert check["derivative_jump"] > 0.1

    def test_bent_decomposition_of_the_value(self):
        case = build_case("u_hat", 4)
        bent = bent_decomposition(case)
        assert bent.first_power == 2
        nptest.assert_allclose(bent.jumps[:2], 0.0, atol=1e-12)
        assert abs(bent.jumps[2]) > 0.1

    def test_bent_decomposition_matches_the_pullback(self):
        case = build_case("g_hat", 3)
        bent = bent_decomposition(case)
        for side, coefficients in (("left", bent.left), ("right", bent.right)):
            assert coefficients[0] == pytest.approx(float(case.pullback(0.5, side=side)), rel=1e-12)
        delta = 1e-6
        slope = (case.pullback(0.5 + delta) - case.pullback(0.5)) / delta
        assert bent.right[1] == pytest.approx(slope, rel=1e-4, abs=1e-4)

    def test_remainder_is_smooth_across_the_joint(self):
        case = build_case("g_hat", 3)
        bent = bent_decomposition(case)
        delta = 1e-5
        left = (bent.remainder(0.5) - bent.remainder(0.5 - delta)) / delta
        right = (bent.remainder(0.5 + delta) - bent.remainder(0.5)) / delta
        assert right - left == pytest.approx(0.0, abs=1e-3)

    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_kernel_L_reproduces_the_spline_part(self, name):
        case = build_case(name, 4)
        bent = bent_decomposition(case)
        kv = case.refined(4)
        p = make_projector("L", kv, sel=case.selection(kv))
        s = project(p, bent.spline_part, case.breakpoints)
        xs = np.linspace(0, 1, 201)
        scale = max(1.0, float(np.max(np.abs(bent.spline_part(xs)))))
        assert np.max(np.abs(s(xs) - bent.spline_part(xs))) <= 1e-7 * scale


class TestLadder:

    def test_records_and_slopes(self):
        case = build_case("u_hat", 3)
        records = run_ladder(case, kernels=("K", "ortho"), levels=(2, 4))
        assert [(r.kernel, r.N) for r in records] == [("K", 2), ("K", 4), ("Orthogonal", 2), ("Orthogonal", 4)]
        assert records[0].slope is None
        first, second = records[0], records[1]
        assert second.h == 0.125
        expected = np.log(first.l2_error / second.l2_error) / np.log(2)
        assert second.slope == pytest.approx(expected)

    def test_levels_must_increase(self):
        with pytest.raises(UsageError):
            run_ladder(build_case("u_hat", 3), levels=(8, 4))

    def test_threads_give_the_same_errors(self):
        case = build_case("g_hat", 3)
        serial = run_ladder(case, kernels=("L",), levels=(2, 4), workers=1)
        threaded = run_ladder(case, kernels=("L",), levels=(2, 4), workers=2)
        assert [r.l2_error for r in threaded] == pytest.approx([r.l2_error for r in serial], rel=1e-12)

    def test_frames(self):
        records = [
            ConvergenceRecord(m=3, case="u_hat", kernel=kernel, N=N, h=1 / (2 * N), l2_error=error, slope=slope)
            for kernel, N, error, slope in [
                ("L", 4, 1e-3, None), ("L", 8, 1.25e-4, 3.0),
                ("Orthogonal", 4, 5e-4, None), ("Orthogonal", 8, 6.25e-5, 3.0),
            ]
        ]
        frame = records_frame(records)
        assert list(frame.columns) == RECORD_COLUMNS
        assert np.isnan(frame["slope"].iloc[0])
        summary = slope_summary(records)
        assert list(summary["kernel"]) == ["L", "Orthogonal"]
        nptest.assert_allclose(summary["terminal_slope"], [3.0, 3.0])
        nptest.assert_allclose(summary["l_over_orthogonal"], [2.0, 2.0])
        ratios = error_ratios(records)
        nptest.assert_allclose(ratios["l_over_orthogonal"], [2.0, 2.0])

    def test_floored_levels_are_cut(self):
        records = [
            ConvergenceRecord(m=6, case="u_hat", kernel="Orthogonal", N=N, h=1 / (2 * N), l2_error=error, slope=slope)
            for N, error, slope in [(8, 1e-9, None), (16, 1.6e-11, 6.0), (32, 2e-14, 9.6), (64, 3e-14, -0.6)]
        ]
        kept = resolved(records)
        assert [r.N for r in kept] == [8, 16]
        summary = slope_summary(records)
        assert summary["N"].tolist() == [16]
        assert summary["terminal_slope"].tolist() == pytest.approx([6.0])


@lru_cache(maxsize=None)
def _ladder(name, m, levels=DEFAULT_LADDER):
    return tuple(run_ladder(build_case(name, m), levels=levels))


def _series(records, kernel):
    return [r for r in records if r.kernel == kernel]


ORDERS = [3, 4, 5, 6]
K_SLOPE = {"u_hat": 2.5, "g_hat": 1.5}


@pytest.mark.slow
class TestConvergenceOrders:

    @pytest.mark.parametrize("m", ORDERS)
    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_terminal_slopes(self, name, m):
        summary = slope_summary(_ladder(name, m)).set_index("kernel")
        assert summary.loc["Orthogonal", "terminal_slope"] == pytest.approx(m, abs=0.15)
        assert summary.loc["K", "terminal_slope"] == pytest.approx(K_SLOPE[name], abs=0.2)
        # L approaches the optimal order from above
        assert summary.loc["L", "terminal_slope"] >= m - 0.15

    @pytest.mark.parametrize("m", ORDERS)
    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_errors_decrease_from_N_8(self, name, m):
        records = resolved(_ladder(name, m))
        for kernel in ("K", "L", "Orthogonal"):
            errors = [r.l2_error for r in _series(records, kernel) if r.N >= 8]
            assert all(b < a for a, b in zip(errors, errors[1:])), (kernel, errors)

    @pytest.mark.parametrize("m", ORDERS)
    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_kernel_L_tracks_the_orthogonal_projection(self, name, m):
        ratios = error_ratios(resolved(_ladder(name, m)))
        late = ratios[ratios["N"] >= 32]["l_over_orthogonal"]
        assert (late >= 1.0 - 1e-6).all()
        assert (late <= 5.0).all()

    @pytest.mark.parametrize("m", [3, 4, 5])
    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_reference_slopes_settle(self, name, m):
        records = resolved(_ladder(name, m))
        for kernel in ("K", "Orthogonal"):
            slopes = [r.slope for r in _series(records, kernel) if r.slope is not None][-3:]
            assert max(slopes) - min(slopes) <= 0.2, (kernel, slopes)

    @pytest.mark.parametrize("name", ["u_hat", "g_hat"])
    def test_kernel_L_settles_on_the_extended_ladder(self, name):
        records = _ladder(name, 3, EXTENDED_LADDER)
        slopes = {r.N: r.slope for r in _series(records, "L")}
        assert abs(slopes[256] - 3) < abs(slopes[64] - 3)
        assert slopes[256] >= 3 - 0.15
        ratios = error_ratios(records).set_index("N")["l_over_orthogonal"]
        assert ratios[256] < ratios[64]
