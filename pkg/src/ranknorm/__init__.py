"""Rank-based input normalization and an admissibility audit harness."""
from ._backend import BACKEND
from .metrics import ndcg, spearman
from .operators import (
    OperatorConfig,
    QNorm,
    SinkhornSort,
    SoftSort,
    batch_ecdf_apply,
    make_operator,
    qnorm_apply,
    qnorm_scalarize,
    sinkhorn_apply,
    softsort_apply,
    value_gap_pair,
)
from .rank import (
    CATALOG,
    MonotoneTransform,
    NormalizationStats,
    RankReference,
    RankRepresentation,
    apply_transform,
    empirical_rank,
    fit_stats,
    relaxed_rank,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CATALOG",
    "MonotoneTransform",
    "NormalizationStats",
    "OperatorConfig",
    "QNorm",
    "RankReference",
    "RankRepresentation",
    "SinkhornSort",
    "SoftSort",
    "apply_transform",
    "batch_ecdf_apply",
    "empirical_rank",
    "fit_stats",
    "make_operator",
    "ndcg",
    "qnorm_apply",
    "qnorm_scalarize",
    "relaxed_rank",
    "sinkhorn_apply",
    "softsort_apply",
    "spearman",
    "value_gap_pair",
]
