"""Tape correctness: values match numpy, gradients match finite differences."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from dbdp.nn.autograd import Tensor, concat


def numeric_grad(fn, x, eps=1e-6):
    """Central-difference gradient of a scalar fn at array x."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        up = fn(x)
        x[idx] = orig - eps
        dn = fn(x)
        x[idx] = orig
        g[idx] = (up - dn) / (2 * eps)
    return g


def test_values_match_numpy(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))
    ta, tb, tw = Tensor(a), Tensor(b), Tensor(w)
    out = ((ta * tb + 2.0 - ta) @ tw).tanh().sum(axis=1, keepdims=True).mean()
    expected = np.tanh((a * b + 2.0 - a) @ w).sum(axis=1).mean()
    assert float(out.value) == pytest.approx(expected, abs=1e-14)


def test_numpy_array_defers_to_tensor(rng):
    # ndarray op Tensor must hit the reflected Tensor operator, not
    # element-wise object coercion
    a = rng.standard_normal((2, 3))
    t = Tensor(rng.standard_normal((3, 2)))
    assert isinstance(a @ t, Tensor)
    assert isinstance(a * t.T, Tensor)
    assert isinstance(1.0 - t, Tensor)


def test_composite_gradient_matches_fd(rng):
    a = rng.standard_normal((4, 3))
    w = rng.standard_normal((3, 3))

    def scalar(av):
        return float(np.tanh(av @ w).sum(axis=1, keepdims=True).mean() + (av**2).mean())

    ta = Tensor(a.copy())
    loss = (ta @ w).tanh().sum(axis=1, keepdims=True).mean() + (ta**2.0).mean()
    loss.backward()
    fd = numeric_grad(scalar, a.copy())
    np.testing.assert_allclose(ta.grad, fd, atol=1e-8)


def test_broadcast_bias_gradient(rng):
    x = rng.standard_normal((5, 3))
    b = rng.standard_normal(3)
    tb = Tensor(b.copy())
    loss = ((x + tb) ** 2.0).mean()
    loss.backward()
    fd = numeric_grad(lambda bv: float(((x + bv) ** 2).mean()), b.copy())
    np.testing.assert_allclose(tb.grad, fd, atol=1e-8)
    assert tb.grad.shape == b.shape


def test_matmul_both_sides(rng):
    a = rng.standard_normal((2, 3))
    w = rng.standard_normal((3, 4))
    ta, tw = Tensor(a.copy()), Tensor(w.copy())
    loss = (ta @ tw).sum()
    loss.backward()
    np.testing.assert_allclose(ta.grad, np.ones((2, 4)) @ w.T, atol=1e-14)
    np.testing.assert_allclose(tw.grad, a.T @ np.ones((2, 4)), atol=1e-14)


def test_concat_splits_gradient(rng):
    parts = [Tensor(rng.standard_normal((3, k)).copy()) for k in (1, 2, 1)]
    out = concat(parts, axis=1)
    assert out.shape == (3, 4)
    weights = rng.standard_normal((3, 4))
    (out * weights).sum().backward()
    offset = 0
    for p in parts:
        k = p.shape[1]
        np.testing.assert_allclose(p.grad, weights[:, offset : offset + k], atol=1e-14)
        offset += k


def test_diamond_graph_accumulates(rng):
    # the same node feeding two consumers must accumulate both gradients
    x = Tensor(np.array([[2.0]]))
    y = x * 3.0 + x**2.0
    y.sum().backward()
    assert x.grad[0, 0] == pytest.approx(3.0 + 2.0 * 2.0)


def test_backward_requires_scalar():
    t = Tensor(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        t.backward()


def test_division_by_tensor_rejected():
    t = Tensor(np.ones(2))
    with pytest.raises(TypeError):
        t / Tensor(np.ones(2))


@given(
    x=arrays(
        np.float64,
        array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=4),
        elements=st.floats(-3, 3, allow_nan=False),
    )
)
@settings(max_examples=40, deadline=None)
def test_tanh_sum_gradient_property(x):
    t = Tensor(x.copy())
    t.tanh().sum().backward()
    np.testing.assert_allclose(t.grad, 1.0 - np.tanh(x) ** 2, atol=1e-12)


@given(
    x=arrays(np.float64, (3, 2), elements=st.floats(-2, 2, allow_nan=False)),
    p=st.sampled_from([1.0, 2.0, 3.0]),
)
@settings(max_examples=40, deadline=None)
def test_power_gradient_property(x, p):
    t = Tensor(x.copy())
    (t**p).sum().backward()
    np.testing.assert_allclose(t.grad, p * x ** (p - 1), atol=1e-10)
