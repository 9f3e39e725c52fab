import json

import numpy as np
import pytest

from ranknorm.csvio import ingest_csv, write_csv
from ranknorm.errors import CSVFormatError
from ranknorm.learner import gen_synthetic_task
from ranknorm.report import dumps_report, dumps_rows, emit_report, make_report, metric_row
from ranknorm.rng import RNG_ALGORITHM, seeded_rng, stream_key

# -- RNG --------------------------------------------------------------------


def test_rng_same_stream_is_reproducible():
    a = seeded_rng(42, "alpha").standard_normal(100)
    b = seeded_rng(42, "alpha").standard_normal(100)
    np.testing.assert_array_equal(a, b)


def test_rng_streams_differ_by_label_and_seed():
    a = seeded_rng(42, "alpha").standard_normal(100)
    assert not np.any(a == seeded_rng(42, "beta").standard_normal(100))
    assert not np.any(a == seeded_rng(43, "alpha").standard_normal(100))
    assert stream_key(0, "a/b") != stream_key(0, "a/c")


def test_rng_normal_moments():
    z = seeded_rng(0, "moments").standard_normal(100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_rng_algorithm_is_named():
    assert "Philox" in RNG_ALGORITHM


# -- CSV --------------------------------------------------------------------


def test_ingest_small_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n")
    X, y, names = ingest_csv(p, "y")
    assert X.shape == (3, 2)
    np.testing.assert_array_equal(y, [3, 6, 9])
    assert names == ["x1", "x2"]


def test_ingest_selected_columns_and_target_first(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x1,x2\n3,1,2\n6,4,5\n")
    X, y, names = ingest_csv(p, "y", ["x2"])
    np.testing.assert_array_equal(X, [[2], [5]])
    assert names == ["x2"]


def test_ingest_names_row_and_column_of_bad_cell(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x1,x2,y\nabc,2,3\n")
    with pytest.raises(CSVFormatError, match=r"row 2.*'x1'"):
        ingest_csv(p, "y")


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("x1,x2\n1,2\n", "target"),
        ("x1,y\n1,2\n3\n", "row 3"),
        ("x1,y\n1,inf\n", "row 2"),
        ("x1,y\n", "no data"),
        ("x1,x1,y\n1,2,3\n", "duplicate"),
    ],
)
def test_ingest_format_errors(tmp_path, text, match):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(CSVFormatError, match=match):
        ingest_csv(p, "y")


def test_csv_round_trip_is_bitwise(tmp_path):
    t = gen_synthetic_task(200, 6, 0)
    p = write_csv(tmp_path / "task.csv", t.X, t.y)
    X, y, names = ingest_csv(p, "y")
    np.testing.assert_array_equal(X, t.X)
    np.testing.assert_array_equal(y, t.y)
    assert len(names) == 6


# -- reports ----------------------------------------------------------------


def _report():
    rows = [
        metric_row("e", "b", "", "m", 0.1),
        metric_row("e", "a", "log", "m", None),
        metric_row("e", "a", "exp", "m", float("nan")),
    ]
    return make_report("e", {"seed": 0}, rows, {"x": np.float64(1.5)}, {"a": {"ok": True}})


def test_report_rows_sorted_and_null_handling():
    rep = _report()
    assert [r["operator"] for r in rep["rows"]] == ["a", "a", "b"]
    text = dumps_rows(rep["rows"])
    lines = text.splitlines()
    assert lines[0] == "experiment,operator,transform,metric,value"
    assert lines[1] == "e,a,exp,m,"
    assert lines[2] == "e,a,log,m,"
    assert lines[3] == "e,b,,m,0.10000000000000001"
    parsed = json.loads(dumps_report(rep))
    assert parsed["rows"][0]["value"] is None
    assert '"value": null' in dumps_report(rep)


def test_report_json_key_sorted_and_stable():
    a, b = dumps_report(_report()), dumps_report(_report())
    assert a == b
    parsed = json.loads(a)
    assert list(parsed) == sorted(parsed)
    assert parsed["metadata"]["rng_algorithm"] == RNG_ALGORITHM


def test_emit_byte_identical(tmp_path):
    j1, c1 = emit_report(_report(), tmp_path / "a")
    j2, c2 = emit_report(_report(), tmp_path / "b")
    assert j1.read_bytes() == j2.read_bytes()
    assert c1.read_bytes() == c2.read_bytes()


def test_emit_unwritable_path_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(_report(), blocker / "sub")
