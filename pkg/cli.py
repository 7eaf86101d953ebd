"""
Command-line front end.

    aduals matrix --knots K.json [--select S.json] --emit gram,S,A,B,Um,SL [--out DIR]
    aduals convergence --case u_hat --orders 3..6 --kernels K,L,ortho [--levels 4,8,16 | extended] [--archive]
    aduals project --knots K.json --function x --kernels K [--select S.json]
    aduals selftest [--seed N]
    aduals runs [--run ID]

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from config import DEFAULT_LADDER, DEFAULT_METHOD, DEFAULT_SEED, EXTENDED_LADDER, get_tolerances
from curve_data import test_cases
from db_utils import get_run_history, get_run_records, store_convergence_run
from enhanced import METHODS, build_enhanced
from errors import ApproxDualError, UsageError
from experiments import RECORD_COLUMNS, build_case, records_frame, run_ladder, slope_summary
from gram_dual import approx_dual
from projection import make_projector, normalize_kind, project
from selftest import run_selftest
from utils import frame_to_csv, load_knot_file, load_selection_file, matrix_to_triplets, projection_samples

logger = logging.getLogger(__name__)

MATRIX_NAMES = ("gram", "S", "A", "B", "Um", "SL")
ENHANCED_MATRICES = ("A", "B", "Um", "SL")
SAMPLE_COUNT = 1000


@dataclass(frozen=True)
class RunConfig:
    """Validated command-line settings of one invocation"""
    command: str
    knots: str = None
    select: str = None
    order: int = None
    method: str = DEFAULT_METHOD
    case: str = None
    kernels: tuple = ("K", "L", "Orthogonal")
    orders: tuple = (3, 4, 5, 6)
    levels: tuple = DEFAULT_LADDER
    emit: tuple = ("gram", "S")
    out: str = None
    function: str = None
    quad_points: int = None
    seed: int = DEFAULT_SEED
    workers: int = None
    archive: bool = False
    run: int = None
    limit: int = 10

    def check_paths(self):
        """Fail before any computation when an input is unreadable or an output unwritable"""
        for path in (self.knots, self.select):
            if path is not None and not os.access(path, os.R_OK):
                raise UsageError(f"cannot read {path}")
        if self.out is not None and self.out != "-":
            if self.command == "matrix":
                if os.path.exists(self.out) and not os.path.isdir(self.out):
                    raise UsageError(f"--out {self.out} exists and is not a directory")
                target = self.out if os.path.isdir(self.out) else os.path.dirname(os.path.abspath(self.out))
            else:
                target = os.path.dirname(os.path.abspath(self.out))
            if not os.access(target, os.W_OK):
                raise UsageError(f"cannot write to {target}")


def parse_int_list(text):
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from e


def parse_orders(text):
    """'3..6', '3,5' or '4'"""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo, hi = int(lo), int(hi)
        except ValueError as e:
            raise UsageError(f"bad order range {text!r}") from e
        if lo > hi:
            raise UsageError(f"empty order range {text!r}")
        return tuple(range(lo, hi + 1))
    return parse_int_list(text)


def parse_names(text):
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_config(args):
    kernels = tuple(normalize_kind(k) for k in parse_names(args.kernels))
    if not kernels:
        raise UsageError("--kernels needs at least one kernel")
    emit = parse_names(args.emit)
    unknown = [name for name in emit if name not in MATRIX_NAMES]
    if unknown:
        raise UsageError(f"unknown matrices {unknown}, expected a subset of {MATRIX_NAMES}")
    if args.method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}, expected one of {METHODS}")
    config = RunConfig(
        command=args.command,
        knots=args.knots,
        select=args.select,
        order=args.order,
        method=args.method,
        case=args.case,
        kernels=kernels,
        orders=parse_orders(args.orders),
        levels=EXTENDED_LADDER if args.levels == "extended" else parse_int_list(args.levels),
        emit=emit,
        out=args.out,
        function=args.function,
        quad_points=args.quad_points,
        seed=args.seed,
        workers=args.workers,
        archive=args.archive,
        run=args.run,
        limit=args.limit,
    )
    config.check_paths()
    return config


def write_output(path, text):
    """Write text to path, or to stdout when path is None or '-'"""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _report(config):
    """Stream for human-readable summaries: stderr when the data goes to stdout"""
    return sys.stderr if config.out in (None, "-") else sys.stdout


def _load_knots(config):
    if config.knots is None:
        raise UsageError(f"{config.command} needs --knots")
    kv = load_knot_file(config.knots)
    if config.order is not None and config.order != kv.order:
        raise UsageError(f"--order {config.order} disagrees with the knot file (order {kv.order})")
    return kv


def _load_selection(config, kv, purpose):
    if config.select is None:
        raise UsageError(f"{purpose} needs --select")
    return load_selection_file(config.select, kv)


def cmd_matrix(config):
    kv = _load_knots(config)
    dual = approx_dual(kv)
    matrices = {"gram": dual.gram, "S": dual.S}
    enhanced = None
    if any(name in ENHANCED_MATRICES for name in config.emit):
        sel = _load_selection(config, kv, "emitting " + ",".join(n for n in config.emit if n in ENHANCED_MATRICES))
        enhanced = build_enhanced(dual, sel, method=config.method)
        matrices.update(A=enhanced.A, B=enhanced.B, Um=enhanced.U, SL=enhanced.S_L)

    report = _report(config)
    if config.out not in (None, "-"):
        os.makedirs(config.out, exist_ok=True)
    for name in config.emit:
        text = matrix_to_triplets(matrices[name])
        if config.out in (None, "-"):
            write_output(None, f"# {name}\n{text}")
        else:
            write_output(os.path.join(config.out, f"{name}.csv"), text)

    print(f"order {kv.order}, n = {kv.n}", file=report)
    for name in config.emit:
        shape = matrices[name].shape if hasattr(matrices[name], "shape") else (kv.n, kv.n)
        print(f"{name}: {shape[0]} x {shape[1]}", file=report)
    if enhanced is not None:
        print(f"S_L bandwidth: {enhanced.bandwidth}", file=report)
        if enhanced.condition is not None:
            print(f"A_0 condition (row-scaled): {enhanced.condition:.6g}", file=report)
    return 0


def cmd_convergence(config):
    if config.case not in test_cases:
        raise UsageError(f"--case must be one of {sorted(test_cases)}, got {config.case!r}")
    if not config.levels:
        raise UsageError("--levels must not be empty")
    records = []
    for m in config.orders:
        case = build_case(config.case, m)
        records.extend(run_ladder(case, config.kernels, config.levels, config.method, config.workers))
    write_output(config.out, frame_to_csv(records_frame(records)))

    summary = slope_summary(records)
    report = _report(config)
    print(summary.to_string(index=False, float_format=lambda v: f"{v:.4g}"), file=report)
    if config.archive:
        slopes = {
            f"{row.kernel}:m={row.m}": (None if np.isnan(row.terminal_slope) else float(row.terminal_slope))
            for row in summary.itertuples()
        }
        stored = store_convergence_run(records, config.method, config.levels, {"terminal_slopes": slopes})
        print(f"archived as run {stored['id']}", file=report)
    return 0


def _builtin_function(name, kv):
    """Callable and breakpoints of a built-in function on kv"""
    m = kv.order
    if name == "1":
        return (lambda x: np.ones_like(np.asarray(x, dtype=float))), ()
    if name == "x":
        return (lambda x: np.asarray(x, dtype=float)), ()
    if name.startswith("x^"):
        try:
            power = int(name[2:])
        except ValueError as e:
            raise UsageError(f"bad monomial {name!r}") from e
        if power < 0:
            raise UsageError(f"bad monomial {name!r}")
        return (lambda x: np.asarray(x, dtype=float) ** power), ()
    if name.startswith("tp:"):
        try:
            _, theta, nu = name.split(":")
            theta, nu = float(theta), int(nu)
        except ValueError as e:
            raise UsageError(f"truncated power must read tp:<knot>:<nu>, got {name!r}") from e
        if not 0 <= nu <= m - 1:
            raise UsageError(f"truncated power index {nu} outside 0..{m - 1}")
        power = m - 1 - nu

        def truncated_power(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= theta, (theta - x) ** power, 0.0)

        return truncated_power, (theta,)
    if name in test_cases:
        case = build_case(name, m)
        if kv.a != case.kv0.a or kv.b != case.kv0.b:
            raise UsageError(f"{name} lives on [{case.kv0.a}, {case.kv0.b}], knots span [{kv.a}, {kv.b}]")
        return case.pullback, case.breakpoints
    raise UsageError(f"unknown function {name!r}: use 1, x, x^k, tp:<knot>:<nu>, u_hat or g_hat")


def cmd_project(config):
    kv = _load_knots(config)
    if config.function is None:
        raise UsageError("project needs --function")
    if len(config.kernels) != 1:
        raise UsageError("project takes exactly one kernel")
    kind = config.kernels[0]
    f, breakpoints = _builtin_function(config.function, kv)
    sel = _load_selection(config, kv, "kernel L") if kind == "L" else None
    projector = make_projector(kind, kv, sel=sel, method=config.method)
    if config.quad_points is not None:
        projector = replace(projector, quad_points_per_span=config.quad_points)
    s = project(projector, f, breakpoints)
    xs = np.linspace(kv.a, kv.b, SAMPLE_COUNT)
    samples = projection_samples(xs, f(xs), s(xs))
    write_output(config.out, frame_to_csv(samples))
    print(f"max |f - s| = {np.max(np.abs(samples['residual'])):.6g}", file=_report(config))
    return 0


def cmd_selftest(config):
    results = run_selftest(seed=config.seed, tol=get_tolerances())
    print(results.to_string(index=False))
    failed = results.loc[~results["passed"], "check"].tolist()
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


def cmd_runs(config):
    if config.run is not None:
        rows = get_run_records(config.run)
        if not rows:
            raise UsageError(f"no archived run with id {config.run}")
        print(frame_to_csv(pd.DataFrame(rows, columns=RECORD_COLUMNS)), end="")
        return 0
    history = get_run_history(config.limit)
    if not history:
        print("no archived runs")
        return 0
    for run in history:
        print(f"{run['id']:>4}  {run['created']}  case={run['case']}  method={run['method']}  "
              f"orders={run['orders']}  kernels={run['kernels']}  levels={run['levels']}")
    return 0


COMMANDS = {
    "matrix": cmd_matrix,
    "convergence": cmd_convergence,
    "project": cmd_project,
    "selftest": cmd_selftest,
    "runs": cmd_runs,
}


def make_parser():
    parser = argparse.ArgumentParser(prog="aduals", description="Approximate duals of B-splines")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--knots", help="knot vector JSON file")
    parser.add_argument("--select", help="coarse selection JSON file")
    parser.add_argument("--order", type=int, help="expected spline order of the knot file")
    parser.add_argument("--method", default=DEFAULT_METHOD, help="right inverse: a0 or mp")
    parser.add_argument("--case", help="convergence case: u_hat or g_hat")
    parser.add_argument("--kernels", default="K,L,ortho", help="comma-separated subset of K, L, ortho")
    parser.add_argument("--orders", default="3..6", help="order range such as 3..6")
    parser.add_argument("--levels", default=",".join(str(N) for N in DEFAULT_LADDER),
                        help="comma-separated refinement levels N, or 'extended'")
    parser.add_argument("--emit", default="gram,S", help="comma-separated subset of " + ",".join(MATRIX_NAMES))
    parser.add_argument("--out", help="output file (output directory for matrix)")
    parser.add_argument("--function", help="built-in function: 1, x, x^k, tp:<knot>:<nu>, u_hat, g_hat")
    parser.add_argument("--quad-points", dest="quad_points", type=int, help="Gauss points per span for moments")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the randomized selftest")
    parser.add_argument("--workers", type=int, help="threads for ladder levels (overrides ADUALS_WORKERS)")
    parser.add_argument("--archive", action="store_true", help="store the convergence run in the database")
    parser.add_argument("--run", type=int, help="archived run id to print")
    parser.add_argument("--limit", type=int, default=10, help="number of archived runs to list")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = build_config(args)
        return COMMANDS[config.command](config)
    except ApproxDualError as e:
        print(e.diagnostic(), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
