"""Executable admissibility checks.

* C1 monotone invariance: Spearman between an operator's outputs on data and
  on monotonically transformed data (operator context refit per dataset).
* C2 batch independence: variance of the output at a fixed probe sample
  across random batches that all contain it.
* C3 stability: forward-difference Lipschitz ratios and central-difference
  gradients over a probe grid.

Plus the Lipschitz-in-rank check for QNorm and three negative controls that
must detect the violations they were built for.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .errors import InputError
from .metrics import central_gradient, lipschitz_ratio, output_variance, spearman
from .operators import (
    OperatorConfig,
    batch_ecdf_apply,
    make_operator,
    qnorm_apply,
    softsort_apply,
    value_gap_pair,
)
from .rank import (
    OPERATOR_LEVEL_TRANSFORMS,
    STD_CONVENTION,
    fit_stats,
    get_transform,
    relaxed_rank,
)
from .rng import RNG_ALGORITHM, seeded_rng

RHO_TOL = 1e-9
VARIANCE_TOL = 1e-12
# |Q(x) - Q(x')| and (1 - 2 eps) |r(x) - r(x')| are equal in exact arithmetic;
# a few ulps of slack absorbs rounding in the two evaluation paths
PROP1_SLACK = 4 * np.finfo(np.float64).eps


def default_probe_grid() -> tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(-1.0, 1.0, 64))


@dataclass(frozen=True)
class ComplianceConfig:
    n_samples: int = 2000
    population_size: int = 8000
    n_batches: int = 200
    batch_size: int = 256
    eps_perturb: float = 1e-3
    grad_h: float = 1e-3
    probe_grid: tuple[float, ...] = field(default_factory=default_probe_grid)
    # C2 probe sample and where it is placed in each batch
    probe_value: float = 2.5
    probe_position: str = "random"
    n_prop1_pairs: int = 10_000
    transforms: tuple[str, ...] = OPERATOR_LEVEL_TRANSFORMS
    # negative-control parameters
    control_gap: float = 1e-4
    control_tau_sharp: float = 1e-3
    control_tau_smooth: float = 0.1
    control_eps: float = 1e-6
    control_min_factor: float = 10.0

    def __post_init__(self):
        if self.batch_size > self.population_size:
            raise InputError("batch_size must not exceed population_size")
        if self.batch_size < 1 or self.n_samples < 2:
            raise InputError("batch_size >= 1 and n_samples >= 2 required")
        if self.n_batches < 2:
            raise InputError("n_batches must be >= 2")
        if not (self.eps_perturb > 0 and self.grad_h > 0 and self.control_eps > 0):
            raise InputError("step sizes must be > 0")
        if self.probe_position not in ("random", "first"):
            raise InputError("probe_position must be 'random' or 'first'")
        if len(self.probe_grid) < 1:
            raise InputError("probe_grid must not be empty")
        object.__setattr__(self, "probe_grid", tuple(float(v) for v in self.probe_grid))
        object.__setattr__(self, "transforms", tuple(self.transforms))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["probe_grid"] = list(self.probe_grid)
        d["transforms"] = list(self.transforms)
        return d


@dataclass
class ComplianceReport:
    operator: str
    c1: dict[str, float | None]
    c2: float
    c3: dict[str, float]
    verdicts: dict[str, bool]
    reasons: dict[str, str]
    metadata: dict

    @property
    def admissible(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "c1_spearman": dict(self.c1),
            "c2_variance": self.c2,
            "c3": dict(self.c3),
            "verdicts": dict(self.verdicts),
            "reasons": dict(self.reasons),
            "metadata": dict(self.metadata),
        }


# -- C1 ---------------------------------------------------------------------


def _column_spearman(A: np.ndarray, B: np.ndarray) -> float | None:
    values = [spearman(A[:, j], B[:, j]) for j in range(A.shape[1])]
    if any(v is None for v in values):
        return None
    return min(values)


def run_c1(op, data, transforms=OPERATOR_LEVEL_TRANSFORMS) -> dict[str, float | None]:
    """Spearman(f(x), f(t(x))) per transform, worst feature column.

    The operator is refit on the clean data and again on each transformed
    dataset. ``None`` marks an undefined correlation (constant outputs).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    clean = op.fit(data).transform(data)
    out = {}
    for t in transforms:
        t = get_transform(t)
        shifted = t(data)
        out[t.name] = _column_spearman(clean, op.fit(shifted).transform(shifted))
    return out


def c1_data(cfg: ComplianceConfig, seed: int) -> np.ndarray:
    return seeded_rng(seed, "c1/data").standard_normal((cfg.n_samples, 1))


# -- C2 ---------------------------------------------------------------------


def run_c2(op, cfg: ComplianceConfig, seed: int) -> float:
    """Output variance at the probe sample across random batches.

    The population is drawn once; pointwise operators are fitted on it
    before batching and stay frozen. Each batch is the probe plus
    ``batch_size - 1`` population draws without replacement.
    """
    population = seeded_rng(seed, "c2/population").standard_normal(cfg.population_size)
    if op.pointwise:
        op.fit(population[:, None])
    rng = seeded_rng(seed, "c2/batches")
    values = np.empty(cfg.n_batches)
    for i in range(cfg.n_batches):
        others = population[rng.choice(cfg.population_size, cfg.batch_size - 1, replace=False)]
        pos = int(rng.integers(cfg.batch_size)) if cfg.probe_position == "random" else 0
        batch = np.insert(others, pos, cfg.probe_value)
        values[i] = op.transform(batch[:, None])[pos, 0]
    return output_variance(values)


# -- C3 ---------------------------------------------------------------------


def _scalar_map(op, context: np.ndarray):
    """Operator output at a single probe coordinate as a function of its value.

    Pointwise operators are evaluated on the probe alone; batch operators
    see the probe at position 0 of a fixed context batch.
    """
    if op.pointwise:
        return lambda t: op.transform(np.array([[t]]))[0, 0]

    def f(t):
        batch = context.copy()
        batch[0] = t
        return op.transform(batch[:, None])[0, 0]

    return f


def qnorm_lipschitz_bound(stats, eps_out: float) -> float:
    return 0.25 / float(np.min(stats.sigma)) * (1.0 - 2.0 * eps_out) + 1e-6


def run_c3(op, cfg: ComplianceConfig, seed: int, op_cfg: OperatorConfig | None = None) -> dict[str, float]:
    """Lipschitz-ratio and |gradient| ranges over the probe grid.

    Statistics (and the context batch for batch operators) come from a
    seeded N(0, 1) sample. ``bound`` is the analytic QNorm slope bound for
    those statistics; every operator is judged against it.
    """
    op_cfg = op_cfg or getattr(op, "cfg", OperatorConfig())
    sample = seeded_rng(seed, "c3/fit").standard_normal(cfg.n_samples)
    stats = fit_stats(sample[:, None])
    if op.pointwise:
        op.fit(sample[:, None])
    context = sample[: cfg.batch_size].copy()
    f = _scalar_map(op, context)
    ratios, grads = [], []
    for x in cfg.probe_grid:
        ratios.append(lipschitz_ratio(f, x, cfg.eps_perturb))
        grads.append(abs(central_gradient(f, x, cfg.grad_h)))
    return {
        "lipschitz_min": float(min(ratios)),
        "lipschitz_max": float(max(ratios)),
        "grad_min": float(min(grads)),
        "grad_max": float(max(grads)),
        "bound": qnorm_lipschitz_bound(stats, op_cfg.epsilon_out),
        "sigma_min": float(np.min(stats.sigma)),
    }


# -- Lipschitz in rank space ------------------------------------------------


def verify_prop1(cfg: ComplianceConfig, seed: int, op_cfg: OperatorConfig = OperatorConfig()) -> dict:
    """Check |Q(x) - Q(x')| <= (1 - 2 eps) |r(x) - r(x')| on seeded pairs."""
    stats = fit_stats(seeded_rng(seed, "prop1/fit").standard_normal((cfg.n_samples, 1)))
    pairs = seeded_rng(seed, "prop1/pairs").standard_normal((cfg.n_prop1_pairs, 2))
    x, xp = pairs[:, :1], pairs[:, 1:]
    lhs = np.abs(qnorm_apply(x, stats, op_cfg) - qnorm_apply(xp, stats, op_cfg)).ravel()
    rhs = (1.0 - 2.0 * op_cfg.epsilon_out) * np.abs(
        relaxed_rank(x, stats).data - relaxed_rank(xp, stats).data
    ).ravel()
    excess = lhs - rhs
    violations = int(np.count_nonzero(excess > PROP1_SLACK))
    return {
        "holds": violations == 0,
        "violations": violations,
        "pairs": int(cfg.n_prop1_pairs),
        "max_excess": float(excess.max()),
        "slack": float(PROP1_SLACK),
    }


# -- negative controls ------------------------------------------------------


def softsort_near_tie_ratio(gap: float, tau: float, eps: float) -> float:
    """Forward-difference slope of SoftSort output 0 for the column [t, gap] at t = 0."""
    cfg = OperatorConfig(kind="softsort", tau=tau)
    return lipschitz_ratio(lambda t: softsort_apply([t, gap], cfg, want_matrix=False)[0][0], 0.0, eps)


def run_negative_controls(cfg: ComplianceConfig = ComplianceConfig()) -> dict:
    """Run the three counterexample operators; each must detect its violation.

    The returned dict has one entry per control with a ``fired`` flag and an
    overall ``all_fired``. Callers treat ``all_fired == False`` as a broken
    suite.
    """
    gap_plain = value_gap_pair(0.0, 1.0, "scale")
    gap_exp = value_gap_pair(0.0, 1.0, "exp")
    c1 = {
        "scale": list(gap_plain),
        "exp": list(gap_exp),
        "fired": gap_plain[0] != gap_plain[1] and gap_exp[0] != gap_exp[1],
    }

    b1, b2 = [0.0, 1.0], [0.0, -1.0]
    q1, q2 = batch_ecdf_apply(0.0, b1), batch_ecdf_apply(0.0, b2)
    same = batch_ecdf_apply(0.0, b1) == batch_ecdf_apply(0.0, list(b1))
    c2 = {"batch_1": q1, "batch_2": q2, "identical_batches_agree": same, "fired": q1 != q2 and same}

    sharp = softsort_near_tie_ratio(cfg.control_gap, cfg.control_tau_sharp, cfg.control_eps)
    smooth = softsort_near_tie_ratio(cfg.control_gap, cfg.control_tau_smooth, cfg.control_eps)
    factor = sharp / smooth if smooth > 0 else float("inf")
    c3 = {
        "ratio_tau_sharp": sharp,
        "ratio_tau_smooth": smooth,
        "factor": factor,
        "fired": factor >= cfg.control_min_factor,
    }
    return {
        "c1_value_gap": c1,
        "c2_batch_ecdf": c2,
        "c3_softsort_near_tie": c3,
        "all_fired": bool(c1["fired"] and c2["fired"] and c3["fired"]),
    }


# -- full audit -------------------------------------------------------------


def run_compliance(op_cfg: OperatorConfig, cfg: ComplianceConfig = ComplianceConfig(), seed: int = 0) -> ComplianceReport:
    op = make_operator(op_cfg)
    c1 = run_c1(op, c1_data(cfg, seed), cfg.transforms)
    c2 = run_c2(make_operator(op_cfg), cfg, seed)
    c3 = run_c3(make_operator(op_cfg), cfg, seed, op_cfg)

    reasons = {}
    undefined = sorted(k for k, v in c1.items() if v is None)
    if undefined:
        reasons["C1"] = "undefined Spearman (constant outputs) under: " + ", ".join(undefined)
    defined = [v for v in c1.values() if v is not None]
    c1_ok = not undefined and (min(defined) >= 1.0 - RHO_TOL if defined else True)
    if not c1_ok and "C1" not in reasons:
        worst = min(c1, key=lambda k: c1[k])
        reasons["C1"] = f"Spearman {c1[worst]:.6g} under {worst} is below 1 - {RHO_TOL:g}"
    c2_ok = c2 <= VARIANCE_TOL
    if not c2_ok:
        reasons["C2"] = f"probe output variance {c2:.6g} exceeds {VARIANCE_TOL:g}"
    c3_ok = c3["lipschitz_max"] <= c3["bound"]
    if not c3_ok:
        reasons["C3"] = f"max Lipschitz ratio {c3['lipschitz_max']:.6g} exceeds bound {c3['bound']:.6g}"

    return ComplianceReport(
        operator=op_cfg.kind,
        c1=c1,
        c2=c2,
        c3=c3,
        verdicts={"C1": c1_ok, "C2": c2_ok, "C3": c3_ok},
        reasons=reasons,
        metadata={
            "operator_config": op_cfg.to_dict(),
            "compliance_config": cfg.to_dict(),
            "seed": int(seed),
            "rng_algorithm": RNG_ALGORITHM,
            "kernel_backend": _backend.BACKEND,
            "std_convention": STD_CONVENTION,
            "c1_protocol": "operator refit on each transformed dataset",
        },
    )
