"""Command-line entry point.

Exit codes: 0 when the run completed and every verdict matched its
expectation (an audit that finds a baseline inadmissible is a success),
1 when a verdict contradicts its expectation or output cannot be written,
2 on usage or input-format errors.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .compliance import (
    ComplianceConfig,
    run_compliance,
    run_negative_controls,
    verify_prop1,
)
from .csvio import ingest_csv
from .errors import InputError, RankNormError
from .learner import RobustnessConfig, TabularConfig, TrainConfig, run_robustness, run_tabular_protocol
from .operators import OperatorConfig
from .report import emit_report, make_report, metric_row

OPERATORS = ("qnorm", "softsort", "sinkhorn")


def _hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("hidden sizes must be positive")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--operator", action="append", choices=OPERATORS,
                        help="repeatable; defaults depend on the subcommand")
    common.add_argument("--tau", type=float, default=0.1, help="SoftSort temperature")
    common.add_argument("--sinkhorn-eps", type=float, default=0.1)
    common.add_argument("--sinkhorn-iters", type=int, default=None,
                        help="default 15 (operator level) or 10 (robustness)")
    common.add_argument("--eps-out", type=float, default=1e-6, help="QNorm output clamp")
    common.add_argument("--rank-mode", choices=("relaxed", "exact"), default=None,
                        help="QNorm rank representation (default relaxed; exact for robustness)")
    common.add_argument("--out", default="reports", help="directory for report files")

    audit = argparse.ArgumentParser(add_help=False)
    d = ComplianceConfig()
    audit.add_argument("--n-samples", type=int, default=d.n_samples)
    audit.add_argument("--population-size", type=int, default=d.population_size)
    audit.add_argument("--n-batches", type=int, default=d.n_batches)
    audit.add_argument("--batch-size", type=int, default=d.batch_size)
    audit.add_argument("--eps-perturb", type=float, default=d.eps_perturb)
    audit.add_argument("--grad-h", type=float, default=d.grad_h)
    audit.add_argument("--probe-min", type=float, default=min(d.probe_grid))
    audit.add_argument("--probe-max", type=float, default=max(d.probe_grid))
    audit.add_argument("--probe-count", type=int, default=len(d.probe_grid))
    audit.add_argument("--probe-value", type=float, default=d.probe_value)
    audit.add_argument("--probe-position", choices=("random", "first"), default=d.probe_position)
    audit.add_argument("--prop1-pairs", type=int, default=d.n_prop1_pairs)

    controls = argparse.ArgumentParser(add_help=False)
    controls.add_argument("--control-gap", type=float, default=d.control_gap)
    controls.add_argument("--control-tau-sharp", type=float, default=d.control_tau_sharp)
    controls.add_argument("--control-tau-smooth", type=float, default=d.control_tau_smooth)
    controls.add_argument("--control-eps", type=float, default=d.control_eps)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--lr", type=float, default=0.003)
    training.add_argument("--epochs", type=int, default=None)
    training.add_argument("--weight-decay", type=float, default=None)
    training.add_argument("--hidden", type=_hidden, default=None, help="comma-separated hidden widths")

    parser = argparse.ArgumentParser(prog="ranknorm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    sub.add_parser("comply", parents=[common, audit],
                   help="audit one or more operators against C1-C3 (default: qnorm)")
    sub.add_parser("stability", parents=[common, audit],
                   help="operator-level stability table for all operators")
    rob = sub.add_parser("robustness", parents=[common, training],
                         help="model-level robustness under monotone shifts")
    r = RobustnessConfig()
    rob.add_argument("--n-train", type=int, default=r.n_train)
    rob.add_argument("--n-test", type=int, default=r.n_test)
    rob.add_argument("--features", type=int, default=r.d)
    rob.add_argument("--frozen-stats", action="store_true",
                     help="keep training-time operator context at evaluation")
    tab = sub.add_parser("tabular", parents=[common, training], help="tabular regression protocol on a CSV")
    tab.add_argument("--csv", required=True, dest="csv_path")
    tab.add_argument("--target", required=True)
    tab.add_argument("--columns", default=None, help="comma-separated feature columns")
    tab.add_argument("--test-ratio", type=float, default=TabularConfig().test_ratio)
    sub.add_parser("controls", parents=[common, controls], help="run the negative controls")
    return parser


def _pick(value, default):
    return default if value is None else value


def _operator_config(args, kind: str, iters_default: int, rank_default: str) -> OperatorConfig:
    return OperatorConfig(
        kind=kind,
        epsilon_out=args.eps_out,
        tau=args.tau,
        sinkhorn_epsilon=args.sinkhorn_eps,
        sinkhorn_iters=args.sinkhorn_iters if args.sinkhorn_iters is not None else iters_default,
        rank_mode=args.rank_mode or rank_default,
    )


def _compliance_config(args) -> ComplianceConfig:
    extra = {}
    if hasattr(args, "control_gap"):
        extra = dict(
            control_gap=args.control_gap,
            control_tau_sharp=args.control_tau_sharp,
            control_tau_smooth=args.control_tau_smooth,
            control_eps=args.control_eps,
        )
    if not hasattr(args, "n_samples"):
        return ComplianceConfig(**extra)
    return ComplianceConfig(
        n_samples=args.n_samples,
        population_size=args.population_size,
        n_batches=args.n_batches,
        batch_size=args.batch_size,
        eps_perturb=args.eps_perturb,
        grad_h=args.grad_h,
        probe_grid=tuple(np.linspace(args.probe_min, args.probe_max, args.probe_count)),
        probe_value=args.probe_value,
        probe_position=args.probe_position,
        n_prop1_pairs=args.prop1_pairs,
        **extra,
    )


def _expected(report) -> dict[str, bool]:
    """Verdicts an operator is expected to produce: QNorm passes all three,
    the soft-sorting baselines fail C1 and C2."""
    if report.operator == "qnorm":
        return {"C1": True, "C2": True, "C3": True}
    return {"C1": False, "C2": False}


def _audit(args, experiment: str, operators, cfg: ComplianceConfig):
    rows, results, verdicts, ok = [], {}, {}, True
    op_cfgs = {}
    for kind in operators:
        op_cfg = _operator_config(args, kind, 15, "relaxed")
        op_cfgs[kind] = op_cfg.to_dict()
        rep = run_compliance(op_cfg, cfg, args.seed)
        results[kind] = rep.to_dict()
        for t, rho in rep.c1.items():
            rows.append(metric_row(experiment, kind, t, "c1_spearman", rho))
        rows.append(metric_row(experiment, kind, "", "c2_variance", rep.c2))
        for key in ("lipschitz_min", "lipschitz_max", "grad_min", "grad_max", "bound"):
            rows.append(metric_row(experiment, kind, "", f"c3_{key}", rep.c3[key]))
        expected = _expected(rep)
        matched = all(rep.verdicts[k] == v for k, v in expected.items())
        verdicts[kind] = {
            **{k: ("pass" if v else "fail") for k, v in rep.verdicts.items()},
            "admissible": rep.admissible,
            "as_expected": matched,
        }
        ok &= matched
    return rows, results, verdicts, ok, op_cfgs


def _cmd_comply(args):
    cfg = _compliance_config(args)
    operators = args.operator or ["qnorm"]
    rows, results, verdicts, ok, op_cfgs = _audit(args, "comply", operators, cfg)
    config = {"subcommand": "comply", "seed": args.seed, "operators": op_cfgs, "compliance": cfg.to_dict()}
    return make_report("comply", config, rows, results, verdicts), ok


def _cmd_stability(args):
    cfg = _compliance_config(args)
    operators = args.operator or list(OPERATORS)
    rows, results, verdicts, ok, op_cfgs = _audit(args, "stability", operators, cfg)
    if "qnorm" in operators:
        prop1 = verify_prop1(cfg, args.seed, _operator_config(args, "qnorm", 15, "relaxed"))
        results["prop1"] = prop1
        rows.append(metric_row("stability", "qnorm", "", "prop1_violations", prop1["violations"]))
        verdicts["prop1"] = {"holds": prop1["holds"]}
        ok &= prop1["holds"]
    config = {"subcommand": "stability", "seed": args.seed, "operators": op_cfgs, "compliance": cfg.to_dict()}
    return make_report("stability", config, rows, results, verdicts), ok


def _cmd_controls(args):
    cfg = _compliance_config(args)
    res = run_negative_controls(cfg)
    rows = [
        metric_row("controls", "value-gap-pair", "scale", "gap_after", res["c1_value_gap"]["scale"][1]),
        metric_row("controls", "value-gap-pair", "exp", "gap_after", res["c1_value_gap"]["exp"][1]),
        metric_row("controls", "batch-ecdf", "", "batch_1", res["c2_batch_ecdf"]["batch_1"]),
        metric_row("controls", "batch-ecdf", "", "batch_2", res["c2_batch_ecdf"]["batch_2"]),
        metric_row("controls", "softsort", "", "near_tie_factor", res["c3_softsort_near_tie"]["factor"]),
    ]
    verdicts = {k: {"fired": v["fired"]} for k, v in res.items() if isinstance(v, dict)}
    config = {
        "subcommand": "controls",
        "seed": args.seed,
        "compliance": {k: v for k, v in cfg.to_dict().items() if k.startswith("control_")},
    }
    return make_report("controls", config, rows, res, verdicts), res["all_fired"]


def _cmd_robustness(args):
    rcfg = RobustnessConfig(
        n_train=args.n_train,
        n_test=args.n_test,
        d=args.features,
        refit=not args.frozen_stats,
        sinkhorn_iters=args.sinkhorn_iters if args.sinkhorn_iters is not None else 10,
        qnorm_rank_mode=args.rank_mode or "exact",
    )
    tcfg = TrainConfig(
        lr=args.lr,
        epochs=_pick(args.epochs, 50),
        weight_decay=_pick(args.weight_decay, 0.0),
        seed=args.seed,
        hidden=args.hidden or (16,),
    )
    rows, results, verdicts, ok = [], {}, {}, True
    op_cfgs = {}
    for kind in args.operator or list(OPERATORS):
        op_cfg = _operator_config(args, kind, rcfg.sinkhorn_iters, rcfg.qnorm_rank_mode)
        res = run_robustness(op_cfg, rcfg, tcfg, args.seed)
        op_cfgs[kind] = res["operator_config"]
        evals = res["evaluations"]
        for t, ev in evals.items():
            rows.append(metric_row("robustness", kind, t, "spearman", ev["spearman"]))
            rows.append(metric_row("robustness", kind, t, "ndcg", ev["ndcg"]))
        spears = [ev["spearman"] for ev in evals.values() if ev["spearman"] is not None]
        clean = evals["identity"]["spearman"]
        order = [np.argsort(ev["predictions"], kind="stable") for ev in evals.values()]
        invariant = all(np.array_equal(order[0], o) for o in order[1:])
        results[kind] = {
            "train_spearman": res["train_spearman"],
            "final_loss": res["losses"][-1],
            "initial_loss": res["losses"][0],
            "evaluations": {t: {k: v for k, v in ev.items() if k != "predictions"} for t, ev in evals.items()},
            "spearman_spread": (max(spears) - min(spears)) if spears else None,
            "max_drop_from_clean": (clean - min(spears)) if spears and clean is not None else None,
        }
        verdicts[kind] = {"prediction_order_invariant": invariant}
        if kind == "qnorm" and rcfg.refit and op_cfg.rank_mode == "exact":
            ok &= invariant
    config = {
        "subcommand": "robustness",
        "seed": args.seed,
        "operators": op_cfgs,
        "robustness": rcfg.to_dict(),
        "train": tcfg.to_dict(),
    }
    return make_report("robustness", config, rows, results, verdicts), ok


def _cmd_tabular(args):
    columns = [c.strip() for c in args.columns.split(",")] if args.columns else None
    X, y, names = ingest_csv(args.csv_path, args.target, columns)
    tcfg = TabularConfig(
        test_ratio=args.test_ratio,
        hidden=args.hidden or TabularConfig().hidden,
        epochs=_pick(args.epochs, TabularConfig().epochs),
        lr=args.lr,
        weight_decay=_pick(args.weight_decay, TabularConfig().weight_decay),
    )
    operators = args.operator or ["qnorm"]
    rows, results, op_cfgs = [], {}, {}
    for kind in operators:
        op_cfg = _operator_config(args, kind, 15, "relaxed")
        op_cfgs[kind] = op_cfg.to_dict()
        res = run_tabular_protocol(X, y, tcfg, args.seed, op_cfg)
        for metric in ("train_mse", "test_mse", "train_spearman", "test_spearman"):
            rows.append(metric_row("tabular", kind, "", metric, res[metric]))
        results[kind] = {k: v for k, v in res.items() if k not in ("train_index", "test_index", "losses")}
        results[kind]["final_loss"] = res["losses"][-1]
    config = {
        "subcommand": "tabular",
        "seed": args.seed,
        "csv": str(args.csv_path),
        "target": args.target,
        "features": names,
        "operators": op_cfgs,
        "tabular": tcfg.to_dict(),
    }
    return make_report("tabular", config, rows, results, {}), True


COMMANDS = {
    "comply": _cmd_comply,
    "stability": _cmd_stability,
    "robustness": _cmd_robustness,
    "tabular": _cmd_tabular,
    "controls": _cmd_controls,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report, ok = COMMANDS[args.subcommand](args)
    except InputError as exc:
        print(f"ranknorm {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except RankNormError as exc:
        print(f"ranknorm {args.subcommand}: failed: {exc}", file=sys.stderr)
        return 1
    try:
        json_path, csv_path = emit_report(report, args.out)
    except OSError as exc:
        print(f"ranknorm {args.subcommand}: cannot write report: {exc}", file=sys.stderr)
        return 1
    for kind, v in report["verdicts"].items():
        print(f"{kind}: " + ", ".join(f"{k}={v[k]}" for k in sorted(v)))
    print(f"wrote {json_path} and {csv_path}")
    return 0 if ok else 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
