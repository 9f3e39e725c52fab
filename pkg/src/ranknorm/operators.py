"""QNorm, the soft-sorting baselines and the counterexample operators.

Functional API (``qnorm_apply``, ``softsort_apply``, ...) operates on one
matrix or column. The front-end classes (:class:`QNorm`, :class:`SoftSort`,
:class:`SinkhornSort`) wrap them with a ``fit`` / ``transform`` lifecycle so
experiments can treat all operators alike.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from . import _backend
from .errors import DimensionMismatch, InputError
from .rank import (
    MonotoneTransform,
    NormalizationStats,
    RankReference,
    RankRepresentation,
    as_feature_matrix,
    fit_stats,
    get_transform,
    relaxed_rank,
)

KERNEL_FLOOR = 1e-30

OperatorKind = Literal["qnorm", "softsort", "sinkhorn", "batch-ecdf", "value-gap-pair"]


@dataclass(frozen=True)
class OperatorConfig:
    kind: OperatorKind = "qnorm"
    epsilon_out: float = 1e-6
    tau: float = 0.1
    sinkhorn_epsilon: float = 0.1
    sinkhorn_iters: int = 15
    weights: tuple[float, ...] | None = None
    # QNorm rank representation: logistic z-score ("relaxed") or frozen
    # reference ranks ("exact")
    rank_mode: Literal["relaxed", "exact"] = "relaxed"

    def __post_init__(self):
        if self.kind not in ("qnorm", "softsort", "sinkhorn", "batch-ecdf", "value-gap-pair"):
            raise InputError(f"unknown operator kind {self.kind!r}")
        if not 0 <= self.epsilon_out < 0.5:
            raise InputError("epsilon_out must lie in [0, 0.5)")
        if not self.tau > 0:
            raise InputError("tau must be > 0")
        if not self.sinkhorn_epsilon > 0:
            raise InputError("sinkhorn_epsilon must be > 0")
        if int(self.sinkhorn_iters) < 1:
            raise InputError("sinkhorn_iters must be >= 1")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if any(not np.isfinite(v) or v < 0 for v in w):
                raise InputError("weights must be finite and nonnegative")
            object.__setattr__(self, "weights", w)
        if self.rank_mode not in ("relaxed", "exact"):
            raise InputError(f"unknown rank_mode {self.rank_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights) if self.weights is not None else None
        return d


@dataclass(frozen=True)
class SoftPermutation:
    matrix: np.ndarray
    kind: Literal["row-stochastic", "doubly-stochastic-approx"]

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def _clamp_affine(r: np.ndarray, eps_out: float) -> np.ndarray:
    return r * (1.0 - 2.0 * eps_out) + eps_out


def qnorm_apply(X, stats: NormalizationStats, cfg: OperatorConfig = OperatorConfig()) -> np.ndarray:
    """Entry-wise ``logistic((x - mu) / sigma) * (1 - 2 eps) + eps``.

    No entry depends on any other row, so a sub-batch yields exactly the
    corresponding rows of the full-batch result.
    """
    X = as_feature_matrix(X)
    stats.check(X)
    return _backend.qnorm_map(X, stats.mu, stats.sigma, cfg.epsilon_out)


def qnorm_scalarize(R: RankRepresentation, w=None, cfg: OperatorConfig = OperatorConfig()) -> np.ndarray:
    """Weighted rank score through the logistic CDF, one output per row.

    ``w`` defaults to ``cfg.weights`` and then to the uniform vector 1/d.
    """
    data = np.asarray(R.data, dtype=np.float64)
    d = data.shape[1]
    if w is None:
        w = cfg.weights if cfg.weights is not None else np.full(d, 1.0 / d)
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape[0] != d:
        raise DimensionMismatch(f"weights have length {w.shape[0]}, ranks have d={d}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and nonnegative")
    score = data @ w
    return _clamp_affine(_backend.logistic(score), cfg.epsilon_out)[:, None]


def _column(column) -> np.ndarray:
    x = np.ascontiguousarray(column, dtype=np.float64).ravel()
    if x.shape[0] == 0:
        raise InputError("column must contain at least one value")
    if not np.all(np.isfinite(x)):
        raise InputError("column contains NaN or Inf")
    return x


def _targets(n: int) -> np.ndarray:
    # np.linspace(0, 1, 1) is [0.0]
    return np.linspace(0.0, 1.0, n)


def softsort_apply(column, cfg: OperatorConfig = OperatorConfig(), want_matrix: bool = True):
    """Row-softmax of negative squared gaps, applied to ``linspace(0, 1, n)``.

    Returns ``(outputs, SoftPermutation | None)``.
    """
    x = _column(column)
    out, W = _backend.softsort_column(x, _targets(x.shape[0]), float(cfg.tau), bool(want_matrix))
    return out, (SoftPermutation(W, "row-stochastic") if want_matrix else None)


def sinkhorn_apply(column, cfg: OperatorConfig = OperatorConfig(), want_matrix: bool = True):
    """Entropic Sinkhorn scaling of ``exp(-|x_i - x_j| / eps)``.

    Runs ``cfg.sinkhorn_iters`` alternating updates from ``v = 1`` with
    kernel entries floored at 1e-30, then maps ``linspace(0, 1, n)``
    through ``P = diag(u) K diag(v)``.
    """
    x = _column(column)
    out, P = _backend.sinkhorn_column(
        x,
        _targets(x.shape[0]),
        float(cfg.sinkhorn_epsilon),
        int(cfg.sinkhorn_iters),
        KERNEL_FLOOR,
        bool(want_matrix),
    )
    return out, (SoftPermutation(P, "doubly-stochastic-approx") if want_matrix else None)


def batch_ecdf_apply(x: float, B) -> float:
    """Fraction of batch members ``y`` with ``y <= x``.

    The batch-dependent counterexample operator. The textbook formula sums
    ``1{x <= y}``, but its worked values (Q(x|{x,2}) = 1/2, Q(2|{x,2}) = 1)
    only hold for ``1{y <= x}``, which is what is computed here.
    """
    B = np.asarray(B, dtype=np.float64).ravel()
    if B.shape[0] == 0:
        raise InputError("batch must be non-empty")
    return float(np.count_nonzero(B <= x)) / B.shape[0]


def value_gap_pair(u: float, v: float, g: MonotoneTransform | str) -> tuple[float, float]:
    """Gap operator ``|u - v|`` before and after a monotone transform ``g``."""
    g = get_transform(g)
    gu, gv = g(np.array([u, v], dtype=np.float64))
    return abs(float(u) - float(v)), abs(float(gu) - float(gv))


# -- front-ends -------------------------------------------------------------


class QNorm:
    """Feature-wise QNorm with frozen statistics.

    ``fit`` freezes the statistics (relaxed mode) or the reference
    population (exact mode); ``transform`` never looks at other rows of its
    input. ``refit_per_batch=True`` refits on every ``transform`` call; it
    exists only as an inadmissible negative control.
    """

    name = "qnorm"
    pointwise = True

    def __init__(self, cfg: OperatorConfig = OperatorConfig(), refit_per_batch: bool = False):
        self.cfg = cfg
        self.refit_per_batch = refit_per_batch
        self.stats: NormalizationStats | None = None
        self.reference: RankReference | None = None

    def fit(self, X) -> "QNorm":
        if self.cfg.rank_mode == "exact":
            self.reference = RankReference.fit(X)
        else:
            self.stats = fit_stats(X)
        return self

    def _require_fit(self):
        if (self.reference if self.cfg.rank_mode == "exact" else self.stats) is None:
            raise InputError("QNorm.fit must be called before transform")

    def _frozen_rank(self, X) -> RankRepresentation:
        self._require_fit()
        if self.cfg.rank_mode == "exact":
            return self.reference.rank(X)
        return relaxed_rank(X, self.stats)

    def rank(self, X) -> RankRepresentation:
        if self.refit_per_batch:
            self.fit(X)
        return self._frozen_rank(X)

    def transform(self, X) -> np.ndarray:
        if self.refit_per_batch:
            self.fit(X)
        if self.cfg.rank_mode == "relaxed":
            self._require_fit()
            return qnorm_apply(X, self.stats, self.cfg)
        return _clamp_affine(self._frozen_rank(X).data, self.cfg.epsilon_out)

    def fit_transform(self, X) -> np.ndarray:
        return self.fit(X).transform(X)

    def scalarize(self, X, w=None) -> np.ndarray:
        return qnorm_scalarize(self.rank(X), w, self.cfg)


class _BatchSorter:
    """Column-wise soft sorting over the batch axis; the batch is the context."""

    name = ""
    pointwise = False

    def __init__(self, cfg: OperatorConfig = OperatorConfig()):
        self.cfg = cfg

    def fit(self, X):
        return self

    def _apply(self, column) -> np.ndarray:
        raise NotImplementedError

    def transform(self, X) -> np.ndarray:
        X = as_feature_matrix(X)
        out = np.empty(X.shape)
        for j in range(X.shape[1]):
            out[:, j] = self._apply(X[:, j])
        return out

    def fit_transform(self, X) -> np.ndarray:
        return self.transform(X)


class SoftSort(_BatchSorter):
    name = "softsort"

    def _apply(self, column):
        return softsort_apply(column, self.cfg, want_matrix=False)[0]


class SinkhornSort(_BatchSorter):
    name = "sinkhorn"

    def _apply(self, column):
        return sinkhorn_apply(column, self.cfg, want_matrix=False)[0]


FRONT_ENDS = {"qnorm": QNorm, "softsort": SoftSort, "sinkhorn": SinkhornSort}


def make_operator(cfg: OperatorConfig):
    try:
        return FRONT_ENDS[cfg.kind](cfg)
    except KeyError:
        raise InputError(f"operator kind {cfg.kind!r} has no feature-wise front-end") from None
