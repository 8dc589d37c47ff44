import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from erckit import autograd as ag
from erckit.autograd import Parameter, Tensor
from erckit.errors import MaskError, NonDeterministicError, ShapeError


def grads_of(fn, *params):
    ag.zero_grads(params)
    with ag.recording():
        loss = fn()
    ag.backward(loss)
    return [p.grad for p in params]


def test_sum_gives_ones():
    W = Parameter("W", np.arange(6.0).reshape(2, 3))
    (g,) = grads_of(lambda: ag.sum(W), W)
    assert np.array_equal(g, np.ones((2, 3)))


def test_no_tape_outside_recording():
    W = Parameter("W", np.ones(3))
    loss = ag.sum(W)
    with pytest.raises(RuntimeError, match="no tape"):
        ag.backward(loss)


def test_backward_needs_scalar():
    W = Parameter("W", np.ones(3))
    with ag.recording():
        y = W * 2.0
    with pytest.raises(ShapeError):
        ag.backward(y)


def test_reused_input_accumulates():
    x = Parameter("x", np.array([3.0]))
    (g,) = grads_of(lambda: ag.sum(x * x + x), x)
    assert g.tolist() == [7.0]


def test_grads_accumulate_across_backward_calls():
    x = Parameter("x", np.array([1.0, 2.0]))
    for _ in range(2):
        with ag.recording():
            loss = ag.sum(x * 3.0)
        ag.backward(loss)
    assert x.grad.tolist() == [6.0, 6.0]


def test_masked_softmax_examples():
    y = ag.masked_softmax(Tensor([[0.0, 0.0, 0.0]]), np.array([[True, False, True]])).data
    assert y.tolist() == [[0.5, 0.0, 0.5]]
    assert ag.masked_softmax(Tensor([[123.0]]), np.array([[True]])).data.tolist() == [[1.0]]


def test_masked_softmax_all_masked_row():
    with pytest.raises(MaskError):
        ag.masked_softmax(Tensor(np.zeros((2, 3))), np.array([[True, False, False], [False] * 3]))


def test_masked_softmax_shape_mismatch():
    with pytest.raises(ShapeError):
        ag.masked_softmax(Tensor(np.zeros((2, 3))), np.ones((2, 4), dtype=bool))


def random_softmax_case(rng):
    shape = tuple(int(s) for s in rng.integers(1, 7, size=int(rng.integers(1, 4))))
    scores = rng.normal(0, 10 ** rng.uniform(-2, 2), size=shape)
    mask = rng.random(shape) < rng.uniform(0.2, 1.0)
    idx = rng.integers(0, shape[-1], size=shape[:-1])
    np.put_along_axis(mask, idx[..., None], True, axis=-1)
    return scores, mask


def test_masked_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(500):
        scores, mask = random_softmax_case(rng)
        y = ag.masked_softmax(Tensor(scores), mask).data
        assert np.all(np.abs(y.sum(axis=-1) - 1.0) <= 1e-12)
        assert np.all(y[~mask] == 0.0)
        assert np.all(y[mask] >= 0.0)


def test_masked_softmax_blocks_gradient_to_masked_scores():
    rng = np.random.default_rng(1)
    s = Parameter("s", rng.normal(size=(3, 4)))
    mask = np.array([[1, 0, 1, 1], [0, 1, 0, 0], [1, 1, 1, 0]], dtype=bool)
    w = rng.normal(size=(3, 4))
    (g,) = grads_of(lambda: ag.sum(ag.masked_softmax(s, mask) * w), s)
    assert np.all(g[~mask] == 0.0)


@pytest.mark.parametrize("target", range(7))
def test_uniform_cross_entropy(target):
    assert ag.cross_entropy(Tensor(np.zeros((1, 7))), [target]).item() == pytest.approx(math.log(7), abs=1e-15)


def test_cross_entropy_ignores_rows():
    logits = Tensor(np.array([[5.0, 0.0], [0.0, 0.0]]))
    assert ag.cross_entropy(logits, [-1, 0]).item() == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        ag.cross_entropy(logits, [-1, -1])


def test_weighted_cross_entropy():
    logits = np.array([[2.0, 0.0], [0.0, 1.0]])
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    expected = -(1.0 * logp[0, 0] + 3.0 * logp[1, 1]) / 4.0
    assert ag.cross_entropy(Tensor(logits), [0, 1], weights=[1.0, 3.0]).item() == pytest.approx(expected, abs=1e-15)


def test_layer_norm_normalizes():
    x = np.random.default_rng(2).normal(3.0, 5.0, size=(4, 10))
    y = ag.layer_norm(Tensor(x), Tensor(np.ones(10)), Tensor(np.zeros(10))).data
    assert np.allclose(y.mean(axis=-1), 0.0, atol=1e-12)
    assert np.allclose(y.var(axis=-1), 1.0, atol=1e-5)


def test_dropout_modes():
    x = Tensor(np.ones((50, 50)))
    assert ag.dropout(x, 0.5, None, train=False) is x
    a = ag.dropout(x, 0.5, ag.make_rng(3), train=True).data
    b = ag.dropout(x, 0.5, ag.make_rng(3), train=True).data
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 2.0}
    assert 0.4 < (a == 0).mean() < 0.6
    with pytest.raises(ValueError):
        ag.dropout(x, 1.0, ag.make_rng(0), train=True)


def test_broadcast_add_reduces_gradient():
    x = Parameter("x", np.ones((3, 4)))
    b = Parameter("b", np.zeros(4))
    gx, gb = grads_of(lambda: ag.sum(x + b), x, b)
    assert gb.tolist() == [3.0] * 4 and gx.shape == (3, 4)


# -- finite differences -----------------------------------------------------

def _params(rng, **shapes):
    return {k: Parameter(k, rng.normal(size=s)) for k, s in shapes.items()}


_W = np.random.default_rng(9).normal(size=(4, 6))

PRIMITIVE_CASES = {
    "matmul": (dict(a=(3, 4), b=(4, 2)), lambda p: ag.sum(ag.matmul(p["a"], p["b"]) * _W[:3, :2])),
    "batched_matmul": (dict(a=(2, 3, 4), b=(2, 4, 3)), lambda p: ag.sum(ag.relu(ag.matmul(p["a"], p["b"]) + 0.3))),
    "linear": (dict(x=(5, 3), W=(3, 4), b=(4,)), lambda p: ag.sum(ag.linear(p["x"], p["W"], p["b"]) * _W[:1, :4])),
    "layer_norm": (dict(x=(3, 6), g=(6,), b=(6,)), lambda p: ag.sum(ag.layer_norm(p["x"], p["g"], p["b"]) * _W[:3])),
    "softmax": (dict(s=(3, 5)), lambda p: ag.sum(ag.masked_softmax(p["s"], np.tri(3, 5, 1, dtype=bool)) * _W[:3, :5])),
    "cross_entropy": (dict(z=(4, 7)), lambda p: ag.cross_entropy(p["z"], [0, 3, -1, 6])),
    "shape_ops": (dict(x=(2, 3, 4)), lambda p: ag.sum(ag.swapaxes(ag.reshape(p["x"], (6, 4)), 0, 1) * _W)),
    "concat_expand": (dict(x=(3, 2), y=(3, 1), z=(1, 3)),
                      lambda p: ag.sum(ag.concat_last_dim([p["x"], p["y"]]) * ag.expand(p["z"], (3, 3)))),
    "sum_mean": (dict(x=(3, 4)), lambda p: ag.mean(ag.sum(p["x"] * p["x"], axis=0, keepdims=True) * _W[:1, :4])),
    "sub_neg": (dict(x=(3,), y=(3,)), lambda p: ag.sum((p["x"] - p["y"]) * (-p["x"]))),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVE_CASES))
def test_primitive_gradients(name):
    shapes, fn = PRIMITIVE_CASES[name]
    p = _params(np.random.default_rng(4), **shapes)
    report = ag.grad_check(lambda: fn(p), list(p.values()), h=1e-6, tol=1e-6)
    assert report.passed, report.max_rel_error


def test_mlp_gradient():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 4))
    y = rng.integers(0, 3, 6)
    W1, b1 = Parameter("W1", rng.normal(size=(4, 8))), Parameter("b1", rng.normal(size=8) * 0.1)
    W2, b2 = Parameter("W2", rng.normal(size=(8, 3))), Parameter("b2", np.zeros(3))

    def f():
        return ag.cross_entropy(ag.linear(ag.relu(ag.linear(Tensor(x), W1, b1)), W2, b2), y)

    assert ag.grad_check(f, [W1, b1, W2, b2], tol=1e-6).passed


def test_identity_model_has_zero_error():
    x = Parameter("x", np.random.default_rng(6).normal(size=5))
    report = ag.grad_check(lambda: ag.sum(x), [x])
    assert report.worst < 1e-9


def test_corrupted_backward_fails_check():
    x = Parameter("x", np.random.default_rng(7).normal(size=4))

    def bad_square(t):
        return ag.record_op(t.data ** 2, (t,), lambda g: (g * t.data,))  # missing factor 2

    report = ag.grad_check(lambda: ag.sum(bad_square(x)), [x])
    assert not report.passed
    assert report.worst == pytest.approx(0.5, abs=1e-6)


def test_nondeterministic_forward_detected():
    x = Parameter("x", np.ones(2))
    rng = np.random.default_rng(0)
    with pytest.raises(NonDeterministicError):
        ag.grad_check(lambda: ag.sum(x * float(rng.random())), [x])


# -- Adam -------------------------------------------------------------------

def test_adam_zero_grad_leaves_params():
    p = Parameter("p", np.array([1.5, -2.0]))
    ag.adam_step([p], 0.1, t=1)
    assert p.data.tolist() == [1.5, -2.0]


@given(st.floats(1e-3, 1e3), st.sampled_from([1.0, -1.0]), st.floats(1e-4, 1e-1))
def test_adam_first_step_magnitude_is_lr(mag, sign, lr):
    p = Parameter("p", np.array([0.0]))
    p.grad = np.array([sign * mag])
    ag.adam_step([p], lr, t=1)
    assert p.data[0] == pytest.approx(-sign * lr, rel=1e-4)


def adam_oracle(x, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    return x


def test_adam_quadratic_matches_oracle():
    p = Parameter("x", np.array([0.0]))
    for t in range(1, 51):
        grads_of(lambda: ag.sum((p - 2.0) * (p - 2.0)), p)
        ag.adam_step([p], 0.1, t=t)
    assert abs(p.data[0] - 2.0) < 0.5
    assert p.data[0] == pytest.approx(adam_oracle(0.0, lambda x: 2 * (x - 2), 0.1, 50), abs=1e-12)


@pytest.mark.parametrize("lr", [0.0, -1e-3])
def test_adam_rejects_nonpositive_lr(lr):
    with pytest.raises(ValueError):
        ag.adam_step([Parameter("p", np.zeros(1))], lr)


@given(hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(-50, 50)))
def test_softmax_gradient_rows_sum_to_zero(scores):
    s = Parameter("s", scores[None, :])
    w = np.arange(scores.size, dtype=np.float64)[None, :]
    (g,) = grads_of(lambda: ag.sum(ag.masked_softmax(s, np.ones_like(w, dtype=bool)) * w), s)
    assert abs(g.sum()) <= 1e-9 * max(1.0, np.abs(g).max())
