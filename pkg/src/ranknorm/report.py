"""Experiment report assembly and serialization.

A report is a plain dict with sorted keys, written as indented JSON, plus a
flat CSV of metric rows (experiment, operator, transform, metric, value).
Undefined metrics are ``null`` in JSON and an empty field in CSV. CSV
numbers use 17 significant digits; JSON uses Python's shortest round-trip
float repr. Both round-trip float64 exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import _backend
from .rng import RNG_ALGORITHM

SCHEMA_VERSION = "ranknorm.report/1"
ROW_FIELDS = ("experiment", "operator", "transform", "metric", "value")


def jsonable(obj):
    """Convert numpy values and non-finite floats into JSON-safe Python values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def metric_row(experiment: str, operator: str, transform: str, metric: str, value) -> dict:
    return {
        "experiment": experiment,
        "operator": operator,
        "transform": transform,
        "metric": metric,
        "value": jsonable(value),
    }


def make_report(experiment: str, config: dict, rows: list[dict], results: dict, verdicts: dict) -> dict:
    rows = sorted(rows, key=lambda r: tuple(str(r[k]) for k in ROW_FIELDS[:4]))
    return jsonable(
        {
            "schema_version": SCHEMA_VERSION,
            "experiment": experiment,
            "config": config,
            "metadata": {"rng_algorithm": RNG_ALGORITHM, "kernel_backend": _backend.BACKEND},
            "rows": rows,
            "results": results,
            "verdicts": verdicts,
        }
    )


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def dumps_rows(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in ROW_FIELDS])
    return buf.getvalue()


def emit_report(report: dict, out_dir, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` into ``out_dir``.

    Raises ``OSError`` when the directory cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or report["experiment"]
    json_path = out / f"{stem}.json"
    csv_path = out / f"{stem}.csv"
    json_path.write_text(dumps_report(report), encoding="utf-8")
    csv_path.write_text(dumps_rows(report["rows"]), encoding="utf-8")
    return json_path, csv_path
