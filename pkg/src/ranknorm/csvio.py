"""CSV ingestion for the tabular protocol."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import CSVFormatError


def ingest_csv(path, target_column: str, columns: list[str] | None = None):
    """Read a headed numeric CSV into ``(X, y, feature_names)``.

    Features are ``columns`` if given, else every column except the target.
    Every selected cell must parse as a finite float; errors name the file
    line (the header is line 1) and the column.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise CSVFormatError(f"{path}: cannot read file ({exc})") from None
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise CSVFormatError(f"{path}: empty file or missing header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CSVFormatError(f"{path}: duplicate column names in header")
    if target_column not in header:
        raise CSVFormatError(f"{path}: target column {target_column!r} not in header {header}")
    features = list(columns) if columns else [h for h in header if h != target_column]
    missing = [c for c in features if c not in header]
    if missing:
        raise CSVFormatError(f"{path}: columns {missing} not in header")
    if target_column in features:
        raise CSVFormatError(f"{path}: target column {target_column!r} listed as a feature")
    if not features:
        raise CSVFormatError(f"{path}: no feature columns")

    body = [(lineno, r) for lineno, r in enumerate(rows[1:], start=2) if any(c.strip() for c in r)]
    if not body:
        raise CSVFormatError(f"{path}: no data rows")
    idx = [header.index(c) for c in features]
    t_idx = header.index(target_column)
    X = np.empty((len(body), len(features)))
    y = np.empty(len(body))
    for i, (lineno, r) in enumerate(body):
        if len(r) != len(header):
            raise CSVFormatError(f"{path}: row {lineno} has {len(r)} fields, header has {len(header)}")
        for j, k in enumerate(idx):
            X[i, j] = _number(r[k], lineno, header[k])
        y[i] = _number(r[t_idx], lineno, target_column)
    return X, y, features


def _number(cell: str, lineno: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CSVFormatError(f"non-numeric value {cell!r} at row {lineno}, column {column!r}") from None
    if not math.isfinite(value):
        raise CSVFormatError(f"non-finite value {cell!r} at row {lineno}, column {column!r}")
    return value


def write_csv(path, X, y, feature_names=None, target_name: str = "y") -> Path:
    """Write features and target with 17 significant digits."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    names = list(feature_names) if feature_names else [f"x{j + 1}" for j in range(X.shape[1])]
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*names, target_name])
        for row, target in zip(X, y):
            writer.writerow([format(v, ".17g") for v in row] + [format(target, ".17g")])
    return path
