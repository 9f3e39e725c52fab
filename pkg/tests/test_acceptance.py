"""End-to-end acceptance checks, one test per criterion.

Each test computes every clause of its criterion, records a single
PASS/FAIL line (collected in the terminal summary) and then asserts.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest

from oracles import finite_difference_grads, gradient_check_case, max_relative_error
from ranknorm.cli import run_cli
from ranknorm.compliance import (
    ComplianceConfig,
    c1_data,
    run_c1,
    run_c2,
    run_c3,
    run_negative_controls,
    verify_prop1,
)
from ranknorm.csvio import ingest_csv, write_csv
from ranknorm.learner import (
    RobustnessConfig,
    TabularConfig,
    TrainConfig,
    gen_synthetic_task,
    mlp_backward,
    run_robustness,
    run_tabular_protocol,
    split_indices,
)
from ranknorm.operators import OperatorConfig, QNorm, SinkhornSort, SoftSort
from ranknorm.rank import MODEL_LEVEL_TRANSFORMS, OPERATOR_LEVEL_TRANSFORMS

pytestmark = pytest.mark.slow

SEEDS = range(10)
CFG = ComplianceConfig()
SOFT = OperatorConfig(kind="softsort")
SINK = OperatorConfig(kind="sinkhorn")


def test_criterion_01_c1_exactness(criterion):
    start = time.perf_counter()
    worst = min(
        rho for s in SEEDS for rho in run_c1(QNorm(), c1_data(CFG, s), OPERATOR_LEVEL_TRANSFORMS).values()
    )
    elapsed = time.perf_counter() - start
    ok = abs(worst - 1.0) <= 1e-9 and elapsed < 5.0
    criterion(1, ok, f"QNorm min rho over 10 seeds x 4 transforms = {worst!r}, {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_02_c1_baseline_failure(criterion):
    problems = []
    worst_exp = {}
    for s in SEEDS:
        data = c1_data(CFG, s)
        q = run_c1(QNorm(), data, OPERATOR_LEVEL_TRANSFORMS)
        for name, op in (("softsort", SoftSort(SOFT)), ("sinkhorn", SinkhornSort(SINK))):
            rho = run_c1(op, data, OPERATOR_LEVEL_TRANSFORMS)
            worst_exp[name] = max(worst_exp.get(name, -1.0), rho["exp"])
            if not rho["exp"] < 0.95:
                problems.append(f"{name} seed {s} exp rho {rho['exp']:.3f} >= 0.95")
            for t, r in rho.items():
                if r < 1 - 1e-9 and q[t] - r < 0.05:
                    problems.append(f"{name} seed {s} {t}: margin {q[t] - r:.3f} < 0.05")
    ok = not problems
    detail = f"max exp rho softsort {worst_exp['softsort']:.3f}, sinkhorn {worst_exp['sinkhorn']:.3f}"
    criterion(2, ok, detail + ("" if ok else "; " + "; ".join(problems)))
    assert ok, problems


def test_criterion_03_c2_exactness(criterion):
    start = time.perf_counter()
    q = run_c2(QNorm(), CFG, 0)
    soft = run_c2(SoftSort(SOFT), CFG, 0)
    sink = run_c2(SinkhornSort(SINK), CFG, 0)
    elapsed = time.perf_counter() - start
    ok = q == 0.0 and 5e-3 <= soft <= 1e-1 and 5e-3 <= sink <= 1e-1 and elapsed < 30.0
    criterion(3, ok, f"variance qnorm {q!r}, softsort {soft:.4g}, sinkhorn {sink:.4g}, {elapsed:.2f}s (< 30s)")
    assert ok


def test_criterion_04_c3_bound(criterion):
    res = run_c3(QNorm(), CFG, 0)
    ok = 0.15 <= res["lipschitz_min"] and res["lipschitz_max"] <= 0.26 and res["lipschitz_max"] <= res["bound"]
    criterion(
        4, ok,
        f"ratios in [{res['lipschitz_min']:.4f}, {res['lipschitz_max']:.4f}], bound {res['bound']:.4f}",
    )
    assert ok


def test_criterion_05_lipschitz_in_rank(criterion):
    res = verify_prop1(CFG, 0)
    ok = res["violations"] == 0 and res["pairs"] == 10_000
    criterion(5, ok, f"{res['violations']} violations over {res['pairs']} pairs, max excess {res['max_excess']:.3g}")
    assert ok


def test_criterion_06_negative_controls(criterion):
    res = run_negative_controls(CFG)
    gap = res["c1_value_gap"]["scale"]
    ecdf = (res["c2_batch_ecdf"]["batch_1"], res["c2_batch_ecdf"]["batch_2"])
    factor = res["c3_softsort_near_tie"]["factor"]
    ok = res["all_fired"] and gap == [1.0, 2.5] and ecdf == (0.5, 1.0) and factor >= 10
    criterion(6, ok, f"value gap {gap}, ECDF {ecdf}, SoftSort near-tie factor {factor:.1f}")
    assert ok


def test_criterion_07_gradient_oracle(criterion):
    start = time.perf_counter()
    state, X, y = gradient_check_case(0)
    g = mlp_backward(state, X, y)
    err = max_relative_error([*g.weights, *g.biases], finite_difference_grads(state, X, y))
    elapsed = time.perf_counter() - start
    ok = err < 1e-4 and elapsed < 1.0
    criterion(7, ok, f"max relative error {err:.3g} on 3-4-1 net, {elapsed:.3f}s (< 1s)")
    assert ok


def test_criterion_08_model_level_robustness(criterion):
    start = time.perf_counter()
    rcfg, tcfg = RobustnessConfig(), TrainConfig(epochs=50)
    runs = {kind: run_robustness(OperatorConfig(kind=kind), rcfg, tcfg, seed=0)
            for kind in ("qnorm", "softsort", "sinkhorn")}
    elapsed = time.perf_counter() - start

    def spears(kind):
        ev = runs[kind]["evaluations"]
        return ev["identity"]["spearman"], [ev[t]["spearman"] for t in MODEL_LEVEL_TRANSFORMS]

    q_clean, q_shifted = spears("qnorm")
    q_spread = max(q_shifted) - min(q_shifted)
    q_ev = runs["qnorm"]["evaluations"]
    orders = [np.argsort(q_ev[t]["predictions"], kind="stable") for t in MODEL_LEVEL_TRANSFORMS]
    identical = all(np.array_equal(orders[0], o) for o in orders[1:])
    drops = {}
    for kind in ("softsort", "sinkhorn"):
        clean, shifted = spears(kind)
        drops[kind] = clean - min(shifted)

    clauses = {
        "qnorm clean > 0.55": q_clean > 0.55,
        "qnorm spread <= 0.10": q_spread <= 0.10,
        "qnorm order identical": identical,
        "softsort drop >= 0.15": drops["softsort"] >= 0.15,
        "sinkhorn drop >= 0.15": drops["sinkhorn"] >= 0.15,
        "runtime < 120s": elapsed < 120.0,
    }
    ok = all(clauses.values())
    failed = [k for k, v in clauses.items() if not v]
    criterion(
        8, ok,
        f"qnorm clean {q_clean:.3f}, spread {q_spread:.3g}, order identical {identical}; "
        f"max drop softsort {drops['softsort']:.3f}, sinkhorn {drops['sinkhorn']:.3f}; {elapsed:.1f}s"
        + (f"; failed: {', '.join(failed)}" if failed else ""),
    )
    assert ok, failed


def test_criterion_09_tabular_protocol(criterion, tmp_path):
    task = gen_synthetic_task(1000, 6, 0)
    path = write_csv(tmp_path / "synthetic.csv", task.X, task.y)
    X, y, _ = ingest_csv(path, "y")
    cfg = TabularConfig()
    res = run_tabular_protocol(X, y, cfg, seed=0)
    again = run_tabular_protocol(X, y, cfg, seed=0)
    tr1, te1 = split_indices(X.shape[0], cfg.test_ratio, 0)
    tr2, te2 = split_indices(X.shape[0], cfg.test_ratio, 0)
    deterministic = (
        np.array_equal(tr1, tr2) and np.array_equal(te1, te2)
        and res["losses"] == again["losses"] and res["test_spearman"] == again["test_spearman"]
    )
    ok = res["test_spearman"] > 0.8 and cfg.epochs == 400 and cfg.hidden == (128, 128, 64, 32) and deterministic
    criterion(
        9, ok,
        f"test Spearman {res['test_spearman']:.4f} after {cfg.epochs} epochs, deterministic {deterministic}",
    )
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    codes = [run_cli(["stability", "--seed", "0", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    same = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("stability.json", "stability.csv")
    )
    ok = same and codes == [0, 0]
    criterion(10, ok, f"stability --seed 0 twice: exit codes {codes}, byte-identical {same}")
    assert ok
