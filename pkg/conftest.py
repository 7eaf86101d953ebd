"""
Shared fixtures: the worked knot vector, seeded random knot vectors and a
throwaway archive database.
"""

import numpy as np
import pytest
from sqlalchemy import create_engine

from knots import random_open_knots, random_selection, select_coarse, validate

# Order 2, n = 14; knot 8 is double, so the splines may jump there
EXAMPLE_KNOTS = (0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 8, 9, 10, 11, 12, 12)
EXAMPLE_SELECTION = ((3, 1), (8, 2))

SEED = 20240917


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def example_kv():
    return validate(EXAMPLE_KNOTS, 2)


@pytest.fixture
def example_sel(example_kv):
    return select_coarse(example_kv, EXAMPLE_SELECTION)


@pytest.fixture
def random_cases(rng):
    """Factory of (knot vector, coarse selection) pairs for one order"""
    def make(order, count=3, spans=None):
        cases = []
        for _ in range(count):
            width = spans or int(rng.integers(2 * order + 2, 3 * order + 4))
            kv = random_open_knots(rng, order, width)
            cases.append((kv, random_selection(rng, kv, count=2)))
        return cases
    return make


@pytest.fixture
def archive_engine(tmp_path):
    engine = create_engine(f"sqlite:///{tmp_path / 'runs.db'}")
    yield engine
    engine.dispose()


@pytest.fixture
def knot_file(tmp_path):
    """Writes a knot JSON file and returns its path"""
    def write(knots=EXAMPLE_KNOTS, order=2, name="knots.json"):
        path = tmp_path / name
        path.write_text(f'{{"order": {order}, "knots": {list(knots)}}}', encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def selection_file(tmp_path):
    def write(entries=EXAMPLE_SELECTION, name="select.json"):
        body = ", ".join(f'{{"value": {v}, "mult": {mu}}}' for v, mu in entries)
        path = tmp_path / name
        path.write_text(f'{{"select": [{body}]}}', encoding="utf-8")
        return str(path)
    return write
