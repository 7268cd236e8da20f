"""
Tests for deterministic JSON and CSV output.
"""

import json

import numpy as np
import pytest

from mfdlq.serialization import csv_text, dumps, format_float, write_csv


class TestFormatFloat:
    """Test float formatting."""

    def test_round_trip(self):
        value = 1.0 / 3.0
        assert float(format_float(value)) == value

    def test_integral_values_are_short(self):
        assert format_float(4.0) == "4"

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), -float("inf")])
    def test_non_finite_rejected(self, value):
        with pytest.raises(ValueError):
            format_float(value)


class TestDumps:
    """Test JSON rendering."""

    def test_layout(self):
        text = dumps({"ok": True, "matrix": np.array([[1.0, 0.5]]), "empty": []})
        assert text == '{\n  "ok": true,\n  "matrix": [\n    [1, 0.5]\n  ],\n  "empty": []\n}\n'
        assert json.loads(text)["matrix"] == [[1.0, 0.5]]

    def test_numpy_scalars(self):
        assert dumps({"n": np.int64(3), "x": np.float64(0.25)}) == '{\n  "n": 3,\n  "x": 0.25\n}\n'

    def test_unknown_type(self):
        with pytest.raises(TypeError):
            dumps({"value": object()})


class TestCsv:
    """Test CSV rendering."""

    def test_text(self):
        text = csv_text(["k", "label", "value"], [[0, "a,b", 0.1], [1, "", np.float64(2.0)]])
        assert text == 'k,label,value\n0,"a,b",0.10000000000000001\n1,,2\n'

    def test_header_only(self):
        assert csv_text(["path", "cost"], []) == "path,cost\n"

    def test_file_has_lf_endings(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_csv(path, ["a"], [[1.5], [2.5]])
        assert path.read_bytes() == b"a\n1.5\n2.5\n"
