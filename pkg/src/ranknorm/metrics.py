"""Evaluation metrics.

Metrics that are mathematically undefined for their input (Spearman of a
constant vector, NDCG with zero ideal gain) return ``None`` instead of NaN
so reports can carry them as nulls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .errors import InputError


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float | None
    context: dict = field(default_factory=dict)


def _vector(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf")
    return arr


def spearman(a, b) -> float | None:
    """Pearson correlation of midrank vectors; None if either side is constant."""
    a = _vector(a, "a")
    b = _vector(b, "b")
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise InputError("spearman needs at least two observations")
    ra = rankdata(a) - (a.shape[0] + 1) / 2.0
    rb = rankdata(b) - (b.shape[0] + 1) / 2.0
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        return None
    return max(-1.0, min(1.0, float(ra @ rb) / denom))


def min_max_relevance(y) -> np.ndarray:
    """Map continuous targets onto [0, 1] graded relevance."""
    y = _vector(y, "y")
    span = y.max() - y.min()
    if span == 0:
        return np.zeros_like(y)
    return (y - y.min()) / span


def ndcg(pred_scores, relevance, k: int | None = None) -> float | None:
    """NDCG@k with items ranked by descending score, ties by original index."""
    pred = _vector(pred_scores, "pred_scores")
    rel = _vector(relevance, "relevance")
    if pred.shape != rel.shape:
        raise InputError("pred_scores and relevance differ in length")
    n = pred.shape[0]
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}], got {k}")
    if np.any(rel < 0):
        raise InputError("relevance must be nonnegative")
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    order = np.argsort(-pred, kind="stable")[:k]
    ideal = np.sort(rel)[::-1][:k]
    idcg = float(ideal @ discounts)
    if idcg == 0.0:
        return None
    return float(rel[order] @ discounts) / idcg


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise InputError(f"{what} produced non-finite value {value!r}")
    return value


def lipschitz_ratio(f: Callable[[float], float], x: float, eps: float = 1e-3) -> float:
    if eps == 0:
        raise InputError("eps must be non-zero")
    y0 = _finite(float(f(x)), f"f({x})")
    y1 = _finite(float(f(x + eps)), f"f({x} + {eps})")
    return abs(y1 - y0) / abs(eps)


def central_gradient(f: Callable[[float], float], x: float, h: float = 1e-3) -> float:
    if not h > 0:
        raise InputError("h must be > 0")
    hi = _finite(float(f(x + h)), f"f({x} + {h})")
    lo = _finite(float(f(x - h)), f"f({x} - {h})")
    return (hi - lo) / (2.0 * h)


def operator_shift(f_outputs_shifted, f_outputs) -> float:
    """Mean squared difference between shifted and clean operator outputs."""
    a = _vector(f_outputs_shifted, "f_outputs_shifted")
    b = _vector(f_outputs, "f_outputs")
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.mean((a - b) ** 2))


def output_variance(values) -> float:
    v = _vector(values, "values")
    if v.shape[0] < 1:
        raise InputError("need at least one value")
    # identical values have zero variance exactly; np.var can leave ~1e-34
    # from the rounded mean
    if np.all(v == v[0]):
        return 0.0
    return float(np.var(v))
