# Interface curves and convergence test cases

from errors import UsageError

# Spline curves X(t) = sum_k N_{3,k}(t) P_k along which the field is pulled back
# - order: spline order of the given representation
# - knots: open knot vector of that representation
# - control_points: (x, y) coefficients P_k
# - joint: interior knot where the curve is only C^1
interface_curves = {
    "quadratic_joint": {
        "order": 3,
        "knots": (0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0),
        "control_points": ((0.5, 0.0), (0.6, 0.3), (0.4, 0.7), (0.5, 1.0)),
        "joint": 0.5,
    },
}

# Pullbacks approximated in the convergence study
# - pullback: "value" for u(X(t)), "normal_derivative" for grad u(X(t)) . n(t)
# - frequencies: (a, b) of the field u(x, y) = sin(a x) sin(b y)
# - coarse_mult_offset: the joint is kept with multiplicity m minus this value
# - orders: admissible spline orders
# - expected_K_slope: approximation order the kernel K reaches on this pullback
test_cases = {
    "u_hat": {
        "pullback": "value",
        "curve": "quadratic_joint",
        "frequencies": (3.0, 2.0),
        "coarse_mult_offset": 2,
        "orders": (3, 4, 5, 6),
        "expected_K_slope": 2.5,
        "description": "field values along the curve (C^1 at the joint)",
    },
    "g_hat": {
        "pullback": "normal_derivative",
        "curve": "quadratic_joint",
        "frequencies": (3.0, 2.0),
        "coarse_mult_offset": 1,
        "orders": (3, 4, 5, 6),
        "expected_K_slope": 1.5,
        "description": "normal derivative along the curve (C^0 at the joint)",
    },
}


def get_case_spec(name):
    """
    Returns the table entry of a convergence test case.

    Parameters:
    -----------
    name : str
        "u_hat" or "g_hat"

    Returns:
    --------
    dict
        The case entry with the curve entry merged in under "curve_spec"
    """
    if name not in test_cases:
        raise UsageError(f"unknown case {name!r}, expected one of {sorted(test_cases)}")
    spec = dict(test_cases[name])
    spec["curve_spec"] = interface_curves[spec["curve"]]
    return spec
