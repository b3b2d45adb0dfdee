import numpy as np
import pytest

from dbdp.nn import AdamState, adam_step


def test_zero_gradient_is_identity():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    state = AdamState.for_params(params, learning_rate=0.1)
    before = [p.copy() for p in params]
    adam_step(state, params, [np.zeros_like(p) for p in params])
    for p, b in zip(params, before):
        np.testing.assert_array_equal(p, b)


def test_first_step_magnitude():
    # bias correction makes the first update ~ lr * sign(g)
    params = [np.array([0.0])]
    state = AdamState.for_params(params, learning_rate=1e-3)
    adam_step(state, params, [np.array([1.0])])
    assert params[0][0] == pytest.approx(-1e-3, rel=1e-6)


def test_minimizes_scalar_quadratic():
    theta = [np.array([5.0])]
    state = AdamState.for_params(theta, learning_rate=0.1)
    for _ in range(1000):
        adam_step(state, theta, [2.0 * theta[0]])
    assert abs(theta[0][0]) < 1e-3


def test_step_counter_advances():
    params = [np.zeros(3)]
    state = AdamState.for_params(params, learning_rate=0.01)
    assert state.step == 0
    adam_step(state, params, [np.ones(3)])
    adam_step(state, params, [np.ones(3)])
    assert state.step == 2
