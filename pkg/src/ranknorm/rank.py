"""Rank representations, normalization statistics and monotone transforms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.stats import rankdata

from ._backend import logistic
from .errors import DimensionMismatch, InputError, TransformOverflow

SIGMA_FLOOR = 1e-6
EXP_GUARD = 700.0
STD_CONVENTION = "population (ddof=0) + 1e-6"


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Validate ``X`` as an n x d finite float matrix.

    1-D input is read as a single feature column. The returned array is a
    read-only float64 copy.
    """
    arr = np.array(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must have n >= 1 and d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RankRepresentation:
    data: np.ndarray
    kind: Literal["exact", "relaxed"]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean and floored std, frozen at fit time."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).ravel()
        sigma = np.array(self.sigma, dtype=np.float64).ravel()
        if mu.shape != sigma.shape:
            raise InputError("mu and sigma must have equal length")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise InputError("stats must be finite")
        if np.any(sigma < SIGMA_FLOOR):
            raise InputError(f"sigma entries must be >= {SIGMA_FLOOR}")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def check(self, X: np.ndarray) -> None:
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"data has d={X.shape[1]} but stats were fitted with d={self.d}")


def fit_stats(X) -> NormalizationStats:
    X = as_feature_matrix(X)
    return NormalizationStats(mu=X.mean(axis=0), sigma=X.std(axis=0) + SIGMA_FLOOR)


def empirical_rank(X) -> RankRepresentation:
    """Column-wise midranks mapped onto [0, 1] by (rank - 1) / (n - 1).

    A single sample maps to 0.5.
    """
    X = as_feature_matrix(X)
    n = X.shape[0]
    if n == 1:
        return RankRepresentation(np.full(X.shape, 0.5), "exact")
    ranks = rankdata(X, method="average", axis=0)
    return RankRepresentation((ranks - 1.0) / (n - 1), "exact")


def relaxed_rank(X, stats: NormalizationStats) -> RankRepresentation:
    X = as_feature_matrix(X)
    stats.check(X)
    return RankRepresentation(logistic((X - stats.mu) / stats.sigma), "relaxed")


@dataclass(frozen=True)
class RankReference:
    """Exact ranks against a frozen reference population.

    Reference samples get exactly their :func:`empirical_rank` value; other
    points are placed by linear interpolation between neighbouring reference
    values and clipped to [0, 1]. Evaluation is pointwise, so a query's rank
    never depends on what else is in the query batch.
    """

    knots: tuple[np.ndarray, ...]
    levels: tuple[np.ndarray, ...]
    n: int

    @classmethod
    def fit(cls, X) -> "RankReference":
        X = as_feature_matrix(X)
        n = X.shape[0]
        knots, levels = [], []
        for col in X.T:
            values, counts = np.unique(col, return_counts=True)
            if n == 1:
                lev = np.array([0.5])
            else:
                below = np.concatenate(([0], np.cumsum(counts)[:-1]))
                # same float expression as scipy's average rank, so reference
                # points reproduce empirical_rank bit for bit
                midrank = below + (counts + 1) / 2.0
                lev = (midrank - 1.0) / (n - 1)
            knots.append(values)
            levels.append(lev)
        return cls(tuple(knots), tuple(levels), n)

    @property
    def d(self) -> int:
        return len(self.knots)

    def rank(self, X) -> RankRepresentation:
        X = as_feature_matrix(X)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"data has d={X.shape[1]} but reference has d={self.d}")
        out = np.empty(X.shape)
        for j in range(self.d):
            out[:, j] = np.interp(X[:, j], self.knots[j], self.levels[j])
        return RankRepresentation(out, "exact")


TransformKind = Literal["log-signed", "sqrt-signed", "exp01", "scale", "shift", "warp", "identity"]

_DEFAULT_PARAMS = {
    "log-signed": 0.0,
    "sqrt-signed": 1e-6,
    "exp01": 0.1,
    "scale": 2.5,
    "shift": 3.0,
    "warp": 2.5,
    "identity": 0.0,
}


@dataclass(frozen=True)
class MonotoneTransform:
    """A strictly increasing element-wise map.

    ``param`` is the exponent rate for ``exp01``, the factor for ``scale``,
    the offset for ``shift``, the tanh gain for ``warp`` and the inner offset
    for ``sqrt-signed``; it is ignored by the other kinds.
    """

    kind: TransformKind
    param: float | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in _DEFAULT_PARAMS:
            raise InputError(f"unknown transform kind {self.kind!r}")
        if self.param is None:
            object.__setattr__(self, "param", _DEFAULT_PARAMS[self.kind])
        if self.kind in ("exp01", "scale", "warp") and not self.param > 0:
            raise InputError(f"{self.kind} needs a positive parameter to stay increasing")
        if self.kind == "sqrt-signed" and self.param < 0:
            raise InputError("sqrt-signed offset must be >= 0")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        k, p = self.kind, self.param
        if k == "identity":
            return x.copy()
        if k == "log-signed":
            return np.sign(x) * np.log1p(np.abs(x))
        if k == "sqrt-signed":
            return np.sign(x) * np.sqrt(np.abs(x) + p)
        if k == "exp01":
            arg = p * x
            if np.any(np.abs(arg) > EXP_GUARD):
                raise TransformOverflow(
                    f"transform {self.name!r}: exponent {np.abs(arg).max():.6g} exceeds {EXP_GUARD}"
                )
            return np.exp(arg)
        if k == "scale":
            out = p * x
        elif k == "shift":
            out = x + p
        else:
            out = np.tanh(p * x)
        if not np.all(np.isfinite(out)):
            raise TransformOverflow(f"transform {self.name!r} produced non-finite output")
        return out


CATALOG: dict[str, MonotoneTransform] = {
    "identity": MonotoneTransform("identity", name="identity"),
    "log": MonotoneTransform("log-signed", name="log"),
    "sqrt": MonotoneTransform("sqrt-signed", name="sqrt"),
    "exp": MonotoneTransform("exp01", name="exp"),
    "scale": MonotoneTransform("scale", name="scale"),
    "shift": MonotoneTransform("shift", name="shift"),
    "warp": MonotoneTransform("warp", name="warp"),
}

OPERATOR_LEVEL_TRANSFORMS = ("log", "sqrt", "exp", "scale")
MODEL_LEVEL_TRANSFORMS = ("scale", "shift", "warp", "exp")


def get_transform(name: str | MonotoneTransform) -> MonotoneTransform:
    if isinstance(name, MonotoneTransform):
        return name
    try:
        return CATALOG[name]
    except KeyError:
        raise InputError(f"unknown transform {name!r}; choose from {sorted(CATALOG)}") from None


def apply_transform(X, t: MonotoneTransform | str) -> np.ndarray:
    """Apply a catalog transform element-wise, returning a validated matrix."""
    X = as_feature_matrix(X)
    return as_feature_matrix(get_transform(t)(X))
