"""Tests for canonical JSON, config hashing and the atomic writers."""

import json
import math

import numpy as np
import pytest

from json_utils import (
    atomic_write_json,
    atomic_write_text,
    canonical_json,
    config_hash,
    format_cell,
    metadata_block,
    read_csv_rows,
    to_jsonable,
    write_csv,
)


class TestToJsonable:
    def test_numpy_values(self):
        assert to_jsonable(np.float64(0.5)) == 0.5
        assert to_jsonable(np.arange(3)) == [0, 1, 2]
        assert to_jsonable((1, np.int64(2))) == [1, 2]

    def test_non_finite_floats(self):
        assert to_jsonable([math.inf, -math.inf, math.nan]) == ["inf", "-inf", "nan"]

    def test_keys_become_strings(self):
        assert to_jsonable({1: "a"}) == {"1": "a"}


class TestConfigHash:
    def test_key_order_irrelevant(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_output_location_ignored(self):
        base = {"subcommand": "region", "D": 0.1}
        assert config_hash(base) == config_hash({**base, "out": "x", "workers": 8})

    def test_semantic_change_changes_hash(self):
        base = {"subcommand": "region", "D": 0.1, "seed": 1}
        assert config_hash(base) != config_hash({**base, "D": 0.2})
        assert config_hash(base) != config_hash({**base, "seed": 2})

    def test_canonical_form(self):
        assert canonical_json({"b": [1.5], "a": None}) == '{"a":null,"b":[1.5]}'


class TestCells:
    @pytest.mark.parametrize(
        "value, text",
        [
            (None, ""),
            (True, "true"),
            (0.1, "0.1"),
            (np.float64(0.25), "0.25"),
            (math.inf, "inf"),
            (np.int64(7), "7"),
            ("x", "x"),
        ],
    )
    def test_format_cell(self, value, text):
        assert format_cell(value) == text


class TestWriters:
    def test_atomic_write_json_is_sorted(self, temp_dir):
        path = temp_dir / "out" / "data.json"
        atomic_write_json(path, {"b": 1, "a": np.float64(2.0)})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": 2.0, "b": 1}

    def test_no_temp_files_left(self, temp_dir):
        atomic_write_text(temp_dir / "a.txt", "hello")
        assert [p.name for p in temp_dir.iterdir()] == ["a.txt"]

    def test_failed_write_keeps_old_file(self, temp_dir, mocker):
        path = temp_dir / "data.json"
        atomic_write_json(path, {"ok": 1})
        mocker.patch("json_utils.os.replace", side_effect=OSError("disk full"))
        with pytest.raises(OSError):
            atomic_write_json(path, {"ok": 2})
        assert json.loads(path.read_text()) == {"ok": 1}
        assert [p.name for p in temp_dir.iterdir()] == ["data.json"]

    def test_csv_metadata_and_rows(self, temp_dir):
        path = temp_dir / "rows.csv"
        write_csv(path, ["n", "rate"], [[8, 0.25], [16, None]], "abc123", 7)
        lines = path.read_text().splitlines()
        assert lines[1] == "# config_hash: abc123"
        assert lines[2] == "# seed: 7"
        assert read_csv_rows(path) == [{"n": "8", "rate": "0.25"}, {"n": "16", "rate": ""}]

    def test_rewrite_is_byte_identical(self, temp_dir):
        path = temp_dir / "rows.csv"
        write_csv(path, ["x"], [[0.1 + 0.2]], "h", 1)
        first = path.read_bytes()
        write_csv(path, ["x"], [[0.1 + 0.2]], "h", 1)
        assert path.read_bytes() == first

    def test_metadata_block(self):
        block = metadata_block("h", None)
        assert block["tool"] == "corrbin"
        assert block["seed"] is None
