"""Synthetic latent-ranking task, a NumPy MLP trained with Adam, and the
model-level and tabular experiment protocols."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import InputError, TrainingDiverged
from .metrics import min_max_relevance, ndcg, spearman
from .operators import OperatorConfig, make_operator
from .rank import MODEL_LEVEL_TRANSFORMS, as_feature_matrix, get_transform
from .rng import seeded_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
TARGET_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class TaskData:
    X: np.ndarray
    y: np.ndarray
    w_latent: np.ndarray


def gen_synthetic_task(n: int = 1000, d: int = 6, seed: int = 0) -> TaskData:
    """Latent ranking task: ``y = 0.5 logistic(z) + 0.2 sin z + 0.2 z + 0.1 e``.

    ``X ~ N(0, 1)``, ``w ~ N(0, I)``, ``z = X w`` and ``e ~ N(0, 0.1^2)``.
    Rows are drawn sequentially, so the first ``m`` rows of a larger draw
    equal an ``n = m`` draw with the same seed and ``d``.
    """
    if n < 1 or d < 1:
        raise InputError("n and d must be >= 1")
    w = seeded_rng(seed, "task/w").standard_normal(d)
    X = seeded_rng(seed, "task/X").standard_normal((n, d))
    noise = seeded_rng(seed, "task/noise").normal(0.0, 0.1, n)
    z = X @ w
    y = 0.5 * expit(z) + 0.2 * np.sin(z) + 0.2 * z + 0.1 * noise
    return TaskData(X=X, y=y, w_latent=w)


# -- MLP --------------------------------------------------------------------


@dataclass
class MLPState:
    """Weights ``W[k]`` have shape (fan_in, fan_out); Adam moments mirror them."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InputError("one weight matrix and bias per layer transition required")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise InputError(f"layer {k} has shapes {W.shape}, {b.shape}")
        for moments in (self.m_w, self.v_w):
            if [m.shape for m in moments] != [W.shape for W in self.weights]:
                raise InputError("weight moments must match weight shapes")
        for moments in (self.m_b, self.v_b):
            if [m.shape for m in moments] != [b.shape for b in self.biases]:
                raise InputError("bias moments must match bias shapes")
        if self.step < 0:
            raise InputError("step must be >= 0")

    @classmethod
    def init(cls, layer_sizes, seed: int = 0) -> "MLPState":
        """Xavier-uniform weights, zero biases."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise InputError("need at least input and output sizes, all >= 1")
        rng = seeded_rng(seed, "mlp/init")
        weights = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases = [np.zeros(s) for s in sizes[1:]]
        zeros = lambda arrs: [np.zeros_like(a) for a in arrs]  # noqa: E731
        return cls(sizes, weights, biases, zeros(weights), zeros(weights), zeros(biases), zeros(biases))

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def _forward(state: MLPState, X) -> list[np.ndarray]:
    X = as_feature_matrix(X)
    if X.shape[1] != state.layer_sizes[0]:
        raise InputError(f"input has {X.shape[1]} features, network expects {state.layer_sizes[0]}")
    acts = [X]
    h = X
    last = len(state.weights) - 1
    for k, (W, b) in enumerate(zip(state.weights, state.biases)):
        h = h @ W + b
        if k < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def mlp_forward(state: MLPState, X) -> np.ndarray:
    return _forward(state, X)[-1][:, 0]


def mlp_loss(state: MLPState, X, y, weight_decay: float = 0.0) -> float:
    """MSE plus ``weight_decay / 2`` times the squared norm of all parameters."""
    resid = mlp_forward(state, X) - np.asarray(y, dtype=np.float64)
    penalty = sum(float(np.sum(p * p)) for p in state.params())
    return float(np.mean(resid**2)) + 0.5 * weight_decay * penalty


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float


def mlp_backward(state: MLPState, X, y, weight_decay: float = 0.0) -> Gradients:
    """Exact gradients of :func:`mlp_loss` by backpropagation."""
    acts = _forward(state, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    pred = acts[-1][:, 0]
    if y.shape != pred.shape:
        raise InputError(f"y has {y.shape[0]} entries for {pred.shape[0]} rows")
    n = y.shape[0]
    resid = pred - y
    penalty = sum(float(np.sum(p * p)) for p in state.params())
    loss = float(np.mean(resid**2)) + 0.5 * weight_decay * penalty

    delta = (2.0 / n) * resid[:, None]
    gw = [None] * len(state.weights)
    gb = [None] * len(state.biases)
    for k in range(len(state.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta + weight_decay * state.weights[k]
        gb[k] = delta.sum(axis=0) + weight_decay * state.biases[k]
        if k > 0:
            # acts[k] is post-ReLU, positive exactly where the pre-activation was
            delta = (delta @ state.weights[k].T) * (acts[k] > 0)
    return Gradients(gw, gb, loss)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.003
    epochs: int = 50
    weight_decay: float = 0.0
    seed: int = 0
    hidden: tuple[int, ...] = (16,)
    batch_mode: str = "full-batch"
    loss: str = "mse"

    def __post_init__(self):
        if self.lr < 0 or not np.isfinite(self.lr):
            raise InputError("lr must be finite and >= 0")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if self.weight_decay < 0:
            raise InputError("weight_decay must be >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["adam"] = {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS}
        d["weight_decay_style"] = "coupled L2 (wd * param added to gradient)"
        d["init"] = "xavier-uniform weights, zero biases"
        return d


def adam_step(state: MLPState, grads: Gradients, cfg: TrainConfig) -> MLPState:
    """One bias-corrected Adam update; returns a new state."""
    t = state.step + 1
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t

    def update(params, ms, vs, gs):
        new_p, new_m, new_v = [], [], []
        for p, m, v, g in zip(params, ms, vs, gs):
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
            new_p.append(p - cfg.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS))
            new_m.append(m)
            new_v.append(v)
        return new_p, new_m, new_v

    W, mw, vw = update(state.weights, state.m_w, state.v_w, grads.weights)
    b, mb, vb = update(state.biases, state.m_b, state.v_b, grads.biases)
    return replace(state, weights=W, biases=b, m_w=mw, v_w=vw, m_b=mb, v_b=vb, step=t)


@dataclass
class TrainResult:
    state: MLPState
    losses: list[float]
    operator: object
    inputs: np.ndarray = field(repr=False)


def fit_mlp(A, y, cfg: TrainConfig) -> tuple[MLPState, list[float]]:
    """Full-batch Adam on MSE; ``losses[e]`` is the loss before update ``e``."""
    A = as_feature_matrix(A)
    state = MLPState.init((A.shape[1], *cfg.hidden, 1), cfg.seed)
    losses = []
    for epoch in range(cfg.epochs):
        # overflow surfaces as a non-finite loss and is reported below
        with np.errstate(over="ignore", invalid="ignore"):
            grads = mlp_backward(state, A, y, cfg.weight_decay)
        if not np.isfinite(grads.loss):
            raise TrainingDiverged(epoch, grads.loss)
        losses.append(grads.loss)
        state = adam_step(state, grads, cfg)
    return state, losses


def train(task: TaskData, op, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit the operator front-end on the training inputs, then the MLP on its outputs."""
    A = op.fit(task.X).transform(task.X)
    if np.any(A < 0) or np.any(A > 1):
        raise InputError(f"operator {op.name} produced inputs outside [0, 1]")
    state, losses = fit_mlp(A, task.y, cfg)
    return TrainResult(state=state, losses=losses, operator=op, inputs=A)


def evaluate_robustness(model: MLPState, op, task: TaskData, transforms=MODEL_LEVEL_TRANSFORMS,
                        refit: bool = True) -> dict[str, dict]:
    """Test metrics after feature-wise monotone shifts of the evaluation inputs.

    With ``refit`` the operator is refit on each (transformed) evaluation set;
    otherwise it keeps the context from training. ``"identity"`` is always
    evaluated and serves as the clean reference. Each entry holds
    ``spearman``, ``ndcg`` (k = n, min-max relevance) and ``predictions``.
    """
    relevance = min_max_relevance(task.y)
    names = ["identity", *[get_transform(t).name for t in transforms if get_transform(t).name != "identity"]]
    results = {}
    for name in names:
        Xt = get_transform(name)(task.X)
        if refit:
            op.fit(Xt)
        A = op.transform(Xt)
        pred = mlp_forward(model, A)
        results[name] = {
            "spearman": spearman(task.y, pred),
            "ndcg": ndcg(pred, relevance) if relevance.any() else None,
            "predictions": pred,
            "inputs_in_unit_interval": bool(np.all((A >= 0) & (A <= 1))),
        }
    return results


@dataclass(frozen=True)
class RobustnessConfig:
    n_train: int = 1000
    n_test: int = 1000
    d: int = 6
    transforms: tuple[str, ...] = MODEL_LEVEL_TRANSFORMS
    refit: bool = True
    sinkhorn_iters: int = 10
    # QNorm rank representation in this protocol
    qnorm_rank_mode: str = "exact"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["transforms"] = list(self.transforms)
        return d


def run_robustness(op_cfg: OperatorConfig, rcfg: RobustnessConfig = RobustnessConfig(),
                   tcfg: TrainConfig = TrainConfig(), seed: int = 0) -> dict:
    """Train on clean synthetic data, evaluate on a held-out set under shifts.

    Train and test rows come from one draw of the task (shared latent
    weights); the first ``n_train`` rows train, the rest test.
    """
    task = gen_synthetic_task(rcfg.n_train + rcfg.n_test, rcfg.d, seed)
    train_task = TaskData(task.X[: rcfg.n_train], task.y[: rcfg.n_train], task.w_latent)
    test_task = TaskData(task.X[rcfg.n_train:], task.y[rcfg.n_train:], task.w_latent)
    if op_cfg.kind == "sinkhorn":
        op_cfg = replace(op_cfg, sinkhorn_iters=rcfg.sinkhorn_iters)
    if op_cfg.kind == "qnorm":
        op_cfg = replace(op_cfg, rank_mode=rcfg.qnorm_rank_mode)
    tcfg = replace(tcfg, seed=seed)
    op = make_operator(op_cfg)
    result = train(train_task, op, tcfg)
    evals = evaluate_robustness(result.state, op, test_task, rcfg.transforms, rcfg.refit)
    return {
        "operator": op_cfg.kind,
        "operator_config": op_cfg.to_dict(),
        "losses": result.losses,
        "train_spearman": spearman(train_task.y, mlp_forward(result.state, result.inputs)),
        "evaluations": evals,
    }


# -- tabular protocol -------------------------------------------------------


@dataclass(frozen=True)
class TabularConfig:
    test_ratio: float = 0.25
    hidden: tuple[int, ...] = (128, 128, 64, 32)
    epochs: int = 400
    lr: float = 0.003
    weight_decay: float = 1e-4

    def __post_init__(self):
        if not 0 < self.test_ratio < 1:
            raise InputError("test_ratio must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def split_indices(n: int, test_ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random permutation; the last ``round(test_ratio * n)`` entries are the test set."""
    n_test = int(round(test_ratio * n))
    if n_test < 1 or n - n_test < 2:
        raise InputError(f"cannot split {n} rows with test ratio {test_ratio}")
    perm = seeded_rng(seed, "tabular/split").permutation(n)
    return perm[: n - n_test], perm[n - n_test:]


def run_tabular_protocol(X, y, cfg: TabularConfig = TabularConfig(), seed: int = 0,
                         op_cfg: OperatorConfig = OperatorConfig()) -> dict:
    """Z-score features and target on the training split, QNorm, then a deep MLP.

    All statistics (feature scaler, target scaler, operator) are fitted on
    the training rows only. MSE is reported in normalized-target units.
    """
    X = as_feature_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise InputError("X and y differ in row count")
    if not np.all(np.isfinite(y)):
        raise InputError("targets contain NaN or Inf")
    tr, te = split_indices(X.shape[0], cfg.test_ratio, seed)

    f_mean = X[tr].mean(axis=0)
    f_std = X[tr].std(axis=0)
    f_std = np.where(f_std > 0, f_std, 1.0)
    Xs = (X - f_mean) / f_std

    y_mean, y_std = y[tr].mean(), y[tr].std()
    if y_std < TARGET_STD_FLOOR:
        raise InputError("target column is constant on the training split; cannot z-score it")
    ys = (y - y_mean) / y_std

    op = make_operator(op_cfg)
    op.fit(Xs[tr])
    A_tr, A_te = op.transform(Xs[tr]), op.transform(Xs[te])
    tcfg = TrainConfig(lr=cfg.lr, epochs=cfg.epochs, weight_decay=cfg.weight_decay, seed=seed, hidden=cfg.hidden)
    state, losses = fit_mlp(A_tr, ys[tr], tcfg)
    p_tr, p_te = mlp_forward(state, A_tr), mlp_forward(state, A_te)
    return {
        "n_train": int(tr.shape[0]),
        "n_test": int(te.shape[0]),
        "train_mse": float(np.mean((p_tr - ys[tr]) ** 2)),
        "test_mse": float(np.mean((p_te - ys[te]) ** 2)),
        "train_spearman": spearman(ys[tr], p_tr),
        "test_spearman": spearman(ys[te], p_te),
        "losses": losses,
        "train_index": tr,
        "test_index": te,
        "train_config": tcfg.to_dict(),
    }
