"""
Input and output formats: knot and selection files (JSON), matrices as
CSV triplets and tabular results as CSV.
"""

import csv
import io
import json
import logging

import numpy as np
import pandas as pd

from config import FLOAT_FORMAT
from errors import UsageError
from knots import select_coarse, validate
from linalg_utils import as_dense, to_coo

logger = logging.getLogger(__name__)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}") from e


def load_knot_file(path):
    """
    Read a knot vector file.

    Parameters:
    -----------
    path : str
        JSON file of the form {"order": m, "knots": [t_1, ..., t_{n+m}]}

    Returns:
    --------
    KnotVector
    """
    data = _read_json(path)
    if not isinstance(data, dict) or "order" not in data or "knots" not in data:
        raise UsageError(f"{path}: expected keys 'order' and 'knots'")
    kv = validate(data["knots"], int(data["order"]))
    logger.debug("Loaded order-%d knot vector with n=%d from %s", kv.order, kv.n, path)
    return kv


def load_selection_file(path, kv):
    """
    Read a coarse selection {"select": [{"value": v, "mult": mu}, ...]} against kv.

    Returns:
    --------
    CoarseSelection
    """
    data = _read_json(path)
    entries = data.get("select") if isinstance(data, dict) else None
    if not isinstance(entries, list):
        raise UsageError(f"{path}: expected a 'select' list")
    try:
        values = [(float(entry["value"]), int(entry["mult"])) for entry in entries]
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{path}: every selection entry needs 'value' and 'mult'") from e
    return select_coarse(kv, values)


def format_float(value):
    return FLOAT_FORMAT % value


def matrix_to_triplets(matrix):
    """
    CSV triplets "row,col,value" of the nonzero entries, row-major.

    Parameters:
    -----------
    matrix : ndarray, sparse matrix or BandedSymMatrix

    Returns:
    --------
    str
    """
    coo = to_coo(as_dense(matrix))
    order = np.lexsort((coo.col, coo.row))
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(["row", "col", "value"])
    for k in order:
        writer.writerow([int(coo.row[k]), int(coo.col[k]), format_float(coo.data[k])])
    return output.getvalue()


def triplets_to_matrix(text, shape):
    """Dense matrix from CSV triplets"""
    frame = pd.read_csv(io.StringIO(text))
    dense = np.zeros(shape)
    dense[frame["row"].to_numpy(), frame["col"].to_numpy()] = frame["value"].to_numpy()
    return dense


def frame_to_csv(frame):
    """DataFrame as CSV with 17 significant digits and no index"""
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def projection_samples(xs, exact, approx):
    """Sampled projection as a DataFrame with columns x, f, s, residual"""
    exact = np.asarray(exact, dtype=float)
    approx = np.asarray(approx, dtype=float)
    return pd.DataFrame({"x": xs, "f": exact, "s": approx, "residual": exact - approx})
