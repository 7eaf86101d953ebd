"""Tests for the knot and selection files and the CSV formats."""

import numpy as np
import numpy.testing as nptest
import pandas as pd
import pytest

from errors import EndpointMultiplicity, MultiplicityExceeded, UsageError
from utils import (
    frame_to_csv, load_knot_file, load_selection_file, matrix_to_triplets, projection_samples,
    triplets_to_matrix,
)


class TestFiles:

    def test_knot_file(self, knot_file):
        kv = load_knot_file(knot_file())
        assert kv.order == 2
        assert kv.n == 14

    def test_knot_file_is_validated(self, knot_file):
        with pytest.raises(EndpointMultiplicity):
            load_knot_file(knot_file(knots=(0, 1, 2, 2)))

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"knots": [0, 0, 1, 1]}', encoding="utf-8")
        with pytest.raises(UsageError, match="order"):
            load_knot_file(str(path))

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("order = 2", encoding="utf-8")
        with pytest.raises(UsageError, match="not valid JSON"):
            load_knot_file(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match="cannot read"):
            load_knot_file(str(tmp_path / "absent.json"))

    def test_selection_file(self, example_kv, selection_file):
        sel = load_selection_file(selection_file(), example_kv)
        assert sel.indices == (4, 9)
        assert sel.multiplicities == (1, 2)

    def test_selection_beyond_the_fine_multiplicity(self, example_kv, selection_file):
        with pytest.raises(MultiplicityExceeded):
            load_selection_file(selection_file(entries=((3, 2),)), example_kv)

    def test_selection_entries_need_both_keys(self, example_kv, tmp_path):
        path = tmp_path / "select.json"
        path.write_text('{"select": [{"value": 3}]}', encoding="utf-8")
        with pytest.raises(UsageError, match="'value' and 'mult'"):
            load_selection_file(str(path), example_kv)


class TestCsv:

    def test_triplets(self):
        matrix = np.array([[0.0, 1 / 3], [-2.0, 0.0]])
        text = matrix_to_triplets(matrix)
        lines = text.splitlines()
        assert lines[0] == "row,col,value"
        assert lines[1].startswith("0,1,0.33333333333333")
        assert lines[2] == "1,0,-2"
        nptest.assert_array_equal(triplets_to_matrix(text, (2, 2)), matrix)

    def test_frame_keeps_full_precision(self):
        text = frame_to_csv(pd.DataFrame({"x": [0.1], "n": [3]}))
        assert text == "x,n\n0.10000000000000001,3\n"

    def test_projection_samples(self):
        xs = np.array([0.0, 1.0])
        frame = projection_samples(xs, [1.0, 2.0], [1.0, 1.5])
        assert list(frame.columns) == ["x", "f", "s", "residual"]
        nptest.assert_allclose(frame["residual"], [0.0, 0.5])
