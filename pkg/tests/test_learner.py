import math

import numpy as np
import pytest
from scipy.special import expit

from oracles import finite_difference_grads, gradient_check_case, max_relative_error
from ranknorm.errors import InputError, TrainingDiverged
from ranknorm.learner import (
    Gradients,
    MLPState,
    TabularConfig,
    TaskData,
    TrainConfig,
    adam_step,
    evaluate_robustness,
    fit_mlp,
    gen_synthetic_task,
    mlp_backward,
    mlp_forward,
    mlp_loss,
    run_tabular_protocol,
    split_indices,
    train,
)
from ranknorm.operators import OperatorConfig, QNorm
from ranknorm.rng import seeded_rng


def _manual(weights, biases):
    sizes = (weights[0].shape[0], *[w.shape[1] for w in weights])
    z = lambda arrs: [np.zeros_like(a) for a in arrs]  # noqa: E731
    return MLPState(sizes, weights, biases, z(weights), z(weights), z(biases), z(biases))


# -- task -------------------------------------------------------------------


def test_task_is_deterministic_and_prefix_stable():
    a = gen_synthetic_task(200, 6, 3)
    b = gen_synthetic_task(200, 6, 3)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    c = gen_synthetic_task(50, 6, 3)
    np.testing.assert_array_equal(c.X, a.X[:50])
    np.testing.assert_array_equal(c.y, a.y[:50])
    assert not np.array_equal(gen_synthetic_task(50, 6, 4).y, c.y)


def test_task_formula_at_origin():
    z = 0.0
    assert 0.5 * expit(z) + 0.2 * math.sin(z) + 0.2 * z == 0.25


def test_task_noise_scale():
    t = gen_synthetic_task(100_000, 6, 0)
    z = t.X @ t.w_latent
    resid = t.y - (0.5 * expit(z) + 0.2 * np.sin(z) + 0.2 * z)
    assert abs(resid.std() - 0.01) < 0.001
    assert abs(resid.mean()) < 0.001


def test_task_rejects_empty():
    with pytest.raises(InputError):
        gen_synthetic_task(0, 6, 0)


# -- MLP --------------------------------------------------------------------


def test_state_shape_invariants():
    s = MLPState.init((3, 4, 1), 0)
    assert [w.shape for w in s.weights] == [(3, 4), (4, 1)]
    with pytest.raises(InputError):
        _manual([np.zeros((3, 4)), np.zeros((5, 1))], [np.zeros(4), np.zeros(1)])
    with pytest.raises(InputError):
        MLPState.init((3,), 0)


def test_xavier_init_limits():
    s = MLPState.init((6, 16, 1), 7)
    assert np.all(np.abs(s.weights[0]) <= math.sqrt(6 / 22))
    assert np.all(np.abs(s.weights[1]) <= math.sqrt(6 / 17))
    assert all(np.all(b == 0) for b in s.biases)


def test_forward_zero_network():
    s = _manual([np.zeros((2, 3)), np.zeros((3, 1))], [np.zeros(3), np.zeros(1)])
    np.testing.assert_array_equal(mlp_forward(s, np.ones((4, 2))), np.zeros(4))


def test_forward_single_linear_layer():
    s = _manual([np.array([[2.0]])], [np.array([1.0])])
    np.testing.assert_array_equal(mlp_forward(s, [[0.0], [1.5], [-2.0]]), [1.0, 4.0, -3.0])


def test_forward_relu_kills_negative_preactivation():
    s = _manual([np.array([[1.0]]), np.array([[1.0]])], [np.array([-5.0]), np.array([0.0])])
    assert mlp_forward(s, [[1.0]])[0] == 0.0
    assert mlp_forward(s, [[7.0]])[0] == 2.0


def test_forward_shape_mismatch():
    with pytest.raises(InputError):
        mlp_forward(MLPState.init((3, 4, 1), 0), np.zeros((2, 2)))


@pytest.mark.parametrize("weight_decay", [0.0, 1e-2])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_central_differences(seed, weight_decay):
    state, X, y = gradient_check_case(seed)
    g = mlp_backward(state, X, y, weight_decay)
    numeric = finite_difference_grads(state, X, y, weight_decay)
    assert max_relative_error([*g.weights, *g.biases], numeric) < 1e-4
    assert g.loss == mlp_loss(state, X, y, weight_decay)


def test_zero_residual_gives_zero_gradient():
    state, X, _ = gradient_check_case(0)
    g = mlp_backward(state, X, mlp_forward(state, X))
    assert all(np.all(a == 0) for a in [*g.weights, *g.biases])


def test_doubling_residual_doubles_output_layer_gradient():
    state, X, y = gradient_check_case(0)
    pred = mlp_forward(state, X)
    g1 = mlp_backward(state, X, pred - (pred - y))
    g2 = mlp_backward(state, X, pred - 2 * (pred - y))
    np.testing.assert_allclose(g2.weights[-1], 2 * g1.weights[-1], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(g2.biases[-1], 2 * g1.biases[-1], rtol=1e-12, atol=1e-15)


def test_backward_shape_mismatch():
    state, X, y = gradient_check_case(0)
    with pytest.raises(InputError):
        mlp_backward(state, X, y[:-1])


# -- Adam -------------------------------------------------------------------


def _const_grads(state, value):
    return Gradients([np.full_like(w, value) for w in state.weights],
                     [np.full_like(b, value) for b in state.biases], 0.0)


def test_adam_zero_gradient_leaves_parameters():
    s = MLPState.init((3, 4, 1), 0)
    s2 = adam_step(s, _const_grads(s, 0.0), TrainConfig())
    for a, b in zip(s.params(), s2.params()):
        np.testing.assert_array_equal(a, b)
    assert s2.step == 1


@pytest.mark.parametrize("g", [0.5, -2.0])
def test_adam_first_step_moves_each_parameter_by_lr(g):
    s = MLPState.init((3, 4, 1), 0)
    cfg = TrainConfig(lr=0.003)
    s2 = adam_step(s, _const_grads(s, g), cfg)
    for a, b in zip(s.params(), s2.params()):
        np.testing.assert_allclose(a - b, math.copysign(cfg.lr, g), rtol=0, atol=1e-9)


def test_adam_does_not_mutate_input_state():
    s = MLPState.init((3, 4, 1), 0)
    before = [p.copy() for p in s.params()]
    adam_step(s, _const_grads(s, 1.0), TrainConfig())
    for a, b in zip(before, s.params()):
        np.testing.assert_array_equal(a, b)


# -- training ---------------------------------------------------------------


@pytest.mark.parametrize("kwargs", [{"lr": -1.0}, {"epochs": 0}, {"weight_decay": -1e-4}, {"lr": math.nan}])
def test_train_config_invariants(kwargs):
    with pytest.raises(InputError):
        TrainConfig(**kwargs)


def test_training_lowers_loss_and_is_deterministic():
    t = gen_synthetic_task(300, 6, 0)
    A = QNorm().fit(t.X).transform(t.X)
    cfg = TrainConfig(epochs=60)
    s1, l1 = fit_mlp(A, t.y, cfg)
    s2, l2 = fit_mlp(A, t.y, cfg)
    assert l1 == l2
    assert l1[-1] < l1[0]
    for a, b in zip(s1.params(), s2.params()):
        np.testing.assert_array_equal(a, b)


def test_zero_learning_rate_keeps_parameters():
    t = gen_synthetic_task(100, 6, 0)
    A = QNorm().fit(t.X).transform(t.X)
    cfg = TrainConfig(lr=0.0, epochs=5)
    s, losses = fit_mlp(A, t.y, cfg)
    fresh = MLPState.init((6, 16, 1), cfg.seed)
    for a, b in zip(fresh.params(), s.params()):
        np.testing.assert_array_equal(a, b)
    assert len(set(losses)) == 1


def test_divergence_reports_epoch():
    A = np.ones((4, 1))
    with pytest.raises(TrainingDiverged) as info:
        fit_mlp(A, np.array([1e200, -1e200, 1e200, -1e200]), TrainConfig(epochs=3))
    assert info.value.epoch == 0


def test_train_rejects_inputs_outside_unit_interval():
    class Raw:
        name = "raw"

        def fit(self, X):
            return self

        def transform(self, X):
            return np.asarray(X)

    with pytest.raises(InputError):
        train(gen_synthetic_task(20, 2, 0), Raw(), TrainConfig(epochs=1))


def test_robustness_identity_matches_clean_metrics():
    t = gen_synthetic_task(300, 6, 1)
    op = QNorm(OperatorConfig(rank_mode="exact"))
    res = train(t, op, TrainConfig(epochs=10))
    ev = evaluate_robustness(res.state, op, t, ("scale",))
    from ranknorm.metrics import spearman

    assert ev["identity"]["spearman"] == spearman(t.y, mlp_forward(res.state, res.inputs))
    assert ev["identity"]["inputs_in_unit_interval"]
    np.testing.assert_array_equal(ev["identity"]["predictions"], ev["scale"]["predictions"])


# -- tabular ----------------------------------------------------------------


def test_split_is_deterministic_and_partitions():
    tr, te = split_indices(100, 0.25, 5)
    tr2, te2 = split_indices(100, 0.25, 5)
    np.testing.assert_array_equal(tr, tr2)
    np.testing.assert_array_equal(te, te2)
    assert te.shape[0] == 25
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(100))
    assert not np.array_equal(te, split_indices(100, 0.25, 6)[1])


def test_tabular_rejects_constant_target():
    X = seeded_rng(0, "test/tab").standard_normal((40, 3))
    with pytest.raises(InputError, match="constant"):
        run_tabular_protocol(X, np.full(40, 2.0), TabularConfig(epochs=1))


def test_tabular_small_run_is_deterministic():
    t = gen_synthetic_task(120, 4, 0)
    cfg = TabularConfig(epochs=5, hidden=(8,))
    a = run_tabular_protocol(t.X, t.y, cfg, seed=1)
    b = run_tabular_protocol(t.X, t.y, cfg, seed=1)
    assert a["losses"] == b["losses"]
    assert a["test_spearman"] == b["test_spearman"]
    assert a["n_test"] == 30


def test_task_dataclass_is_frozen():
    t = gen_synthetic_task(5, 2, 0)
    assert isinstance(t, TaskData)
    with pytest.raises(Exception):
        t.X = None
