from __future__ import annotations

import json

import numpy as np
import pytest

from core.constants import VERSION
from utils.reports import SchemaError, format_value, git_blob_sha1, read_csv, write_csv, write_meta


def test_format_value_handles_special_values():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(float("inf")) == "inf"
    assert format_value(-float("inf")) == "-inf"
    assert format_value(0.1) == "0.1"
    assert format_value(np.float64(0.25)) == "0.25"
    assert format_value(np.int64(7)) == "7"
    assert format_value(np.bool_(False)) == "false"


def test_write_csv_round_trips_rows(tmp_path):
    path = write_csv(tmp_path / "out" / "rows.csv", ("a", "b"), [{"a": 1, "b": None}, {"b": 2.5, "a": 2}])
    assert read_csv(path) == [{"a": "1", "b": ""}, {"a": "2", "b": "2.5"}]
    assert not (tmp_path / "out" / "rows.csv.tmp").exists()


def test_write_csv_rejects_rows_that_do_not_match_columns(tmp_path):
    with pytest.raises(SchemaError, match="missing \\['b'\\]"):
        write_csv(tmp_path / "rows.csv", ("a", "b"), [{"a": 1}])
    with pytest.raises(SchemaError, match="unexpected \\['c'\\]"):
        write_csv(tmp_path / "rows.csv", ("a",), [{"a": 1, "c": 2}])


def test_git_blob_sha1_matches_git():
    assert git_blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_write_meta_records_hash_and_extra_fields(tmp_path):
    path = write_meta(
        tmp_path / "meta.json",
        {"experiment": "norms"},
        "{}",
        {"python": "3.11"},
        "2024-01-01T00:00:00",
        "2024-01-01T00:01:00",
        extra={"workers_used": 2},
    )
    meta = json.loads(path.read_text(encoding="utf-8"))
    assert meta["version"] == VERSION
    assert meta["config_hash"] == git_blob_sha1("{}")
    assert meta["workers_used"] == 2
    assert meta["host"] == {"python": "3.11"}
