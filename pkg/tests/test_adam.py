import math

import numpy as np
import pytest

from fedgat.autodiff import AdamState, ParamStore, SchemaError, adam_step


def test_zero_gradient_leaves_params():
    params = ParamStore([("w", np.array([1.0, -2.0, 3.0]))])
    out = adam_step(params, ParamStore([("w", np.zeros(3))]), AdamState(lr=0.1))
    np.testing.assert_array_equal(out["w"], params["w"])


def test_zero_gradient_decays_moments():
    params = ParamStore([("w", np.ones(3))])
    state = AdamState(lr=0.1, step=3)
    state.m = ParamStore([("w", np.full(3, 0.5))])
    state.v = ParamStore([("w", np.full(3, 0.2))])
    adam_step(params, ParamStore([("w", np.zeros(3))]), state)
    np.testing.assert_allclose(state.m["w"], 0.45)
    np.testing.assert_allclose(state.v["w"], 0.2 * 0.999)
    assert state.step == 4


def test_first_step_hand_computed():
    # t=1: m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2,
    # p = 0 - 0.1 * 1 / (1 + 1e-8)
    state = AdamState(lr=0.1)
    out = adam_step(ParamStore([("p", np.array(0.0))]), ParamStore([("p", np.array(1.0))]), state)
    assert float(out["p"]) == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-12)
    assert float(state.m["p"]) == pytest.approx(0.1)
    assert float(state.v["p"]) == pytest.approx(0.001)
    assert state.step == 1


def reference_adam(p, grads, lr=5e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam written from the recurrence."""
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    return p


def test_matches_scalar_recurrence():
    rng = np.random.default_rng(0)
    gs = rng.normal(size=25)
    state = AdamState()
    params = ParamStore([("p", np.array([0.3]))])
    for g in gs:
        params = adam_step(params, ParamStore([("p", np.array([g]))]), state)
    assert float(params["p"][0]) == pytest.approx(reference_adam(0.3, gs), rel=1e-12)


def test_quadratic_loss_decreases():
    # loss = 0.5 * ||p - target||^2, gradient p - target
    target = np.array([1.0, -2.0, 0.5])
    params = ParamStore([("p", np.zeros(3))])
    state = AdamState(lr=0.01)
    losses = []
    for _ in range(100):
        p = params["p"]
        losses.append(0.5 * float(((p - target) ** 2).sum()))
        params = adam_step(params, ParamStore([("p", p - target)]), state)
    assert all(b < a for a, b in zip(losses[1:], losses[2:]))
    assert state.step == 100


def test_schema_mismatch():
    with pytest.raises(SchemaError):
        adam_step(ParamStore([("a", np.zeros(2))]), ParamStore([("b", np.zeros(2))]), AdamState())
    with pytest.raises(SchemaError):
        adam_step(ParamStore([("a", np.zeros(2))]), ParamStore([("a", np.zeros(3))]), AdamState())


def test_zero_learning_rate_is_exact():
    rng = np.random.default_rng(3)
    params = ParamStore([("w", rng.normal(size=(4, 4)))])
    state = AdamState(lr=0.0)
    out = adam_step(params, ParamStore([("w", rng.normal(size=(4, 4)))]), state)
    assert out["w"].tobytes() == params["w"].tobytes()


def test_accumulator_shapes_follow_params():
    params = ParamStore([("a", np.zeros((2, 3))), ("b", np.zeros(4))])
    state = AdamState()
    adam_step(params, ParamStore([("a", np.ones((2, 3))), ("b", np.ones(4))]), state)
    assert state.m.schema() == params.schema() == state.v.schema()
