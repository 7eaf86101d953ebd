"""
Runtime configuration: numerical tolerances, run defaults and environment overrides
"""

import logging
import os
from dataclasses import dataclass, fields, replace

logger = logging.getLogger(__name__)

# Refinement levels N of the convergence ladder (h = 1/(2N))
DEFAULT_LADDER = (4, 8, 16, 32, 64)

# Longer ladder for following kernel L into its asymptotic regime
EXTENDED_LADDER = DEFAULT_LADDER + (128, 256)

# L2 errors of the O(1) pullbacks at or below this are dominated by round-off
ERROR_FLOOR = 1e-13

# Right inverse used for the enhancement matrix: "a0" or "mp"
DEFAULT_METHOD = "a0"

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"

# Seed of the randomized self-test and the B-row cross-check
DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class Tolerances:
    """
    All numerical tolerances in one record.

    Every field is a relative tolerance unless noted otherwise. Scaling the
    whole record (see `scaled`) loosens or tightens every check at once.
    """
    # |f - s| on the 200-point check grid of represent_in, relative to max(1, |f|)
    represent_residual: float = 1e-11
    # residual of the equilibrated reproduction system S*Gamma*c_p = c_p, relative to its largest right-hand side
    reproduction_system: float = 1e-9
    # alpha_{m,nu}: fit residual, agreement across references and with the entry solve
    calibration: float = 1e-8
    # max |A R - I| and max |A U - B|
    right_inverse: float = 1e-10
    # zero pattern of w rows, relative to the magnitude of the summed terms
    zero_pattern: float = 1e-7
    # w D_{2m-1}...D_m = v, relative to max |v|
    consistency: float = 1e-10
    # c^T Gamma S = c^T for polynomial coefficient vectors, relative to max |c|
    kernel_reproduction: float = 1e-10
    # c^T Gamma S_L = c^T for coarse-spline coefficient vectors, relative to max |c|
    enhanced_reproduction: float = 1e-8
    # condition number above which a preconditioned square system is singular
    max_condition: float = 1e14

    def scaled(self, factor):
        """Return a copy with every tolerance multiplied by `factor` (max_condition divided)"""
        values = {}
        for f in fields(self):
            value = getattr(self, f.name)
            values[f.name] = value / factor if f.name == "max_condition" else value * factor
        return replace(self, **values)


DEFAULT_TOLERANCES = Tolerances()


def get_tolerances():
    """
    Tolerances in effect for this process.

    The environment variable ADUALS_TOL holds a positive factor applied to
    every default tolerance; an unusable value falls back to the defaults.
    """
    raw = os.environ.get("ADUALS_TOL", "")
    if not raw:
        return DEFAULT_TOLERANCES
    try:
        factor = float(raw)
    except ValueError:
        logger.warning("Ignoring ADUALS_TOL=%r: not a number", raw)
        return DEFAULT_TOLERANCES
    if not factor > 0:
        logger.warning("Ignoring ADUALS_TOL=%r: factor must be positive", raw)
        return DEFAULT_TOLERANCES
    return DEFAULT_TOLERANCES.scaled(factor)


def get_worker_count():
    """Thread count for ladder levels from ADUALS_WORKERS (default 1)"""
    raw = os.environ.get("ADUALS_WORKERS", "")
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logger.warning("Ignoring ADUALS_WORKERS=%r: not an integer", raw)
        return 1
    return max(1, workers)
