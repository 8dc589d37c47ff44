"""A small reverse-mode differentiation engine over float64 numpy arrays.

Operations are recorded on the active :class:`Tape` (see :func:`recording`)
when at least one input requires a gradient. Outside a recording block every
op is a plain numpy computation, which is what prediction uses.

    with recording() as tape:
        loss = cross_entropy(linear(x, W, b), y)
    tape.backward(loss)      # or backward(loss)
    W.grad
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MaskError, NonDeterministicError, ShapeError

CHECK_FINITE = True
LAYER_NORM_EPS = 1e-5

_ACTIVE: Optional["Tape"] = None


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._tape: Optional[Tape] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        backward(self)


class Parameter(Tensor):
    """A named trainable leaf. ``grad`` is always allocated."""

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _not_scalar(t):
    raise ShapeError(f"expected a scalar, got shape {t.shape}")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple
    backward: Callable


@dataclass
class Tape:
    """Operations in execution order; backward replays them in reverse."""

    nodes: list = field(default_factory=list)

    def record(self, out: Tensor, inputs: tuple, backward_fn: Callable):
        out.requires_grad = True
        out._tape = self
        self.nodes.append(_Node(out, inputs, backward_fn))

    def backward(self, loss: Tensor):
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise RuntimeError("loss was not recorded on this tape")
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp._tape is None:  # leaf
                    inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
                elif id(inp) in grads:
                    grads[id(inp)] = grads[id(inp)] + gi
                else:
                    grads[id(inp)] = gi


@contextlib.contextmanager
def recording():
    global _ACTIVE
    prev, tape = _ACTIVE, Tape()
    _ACTIVE = tape
    try:
        yield tape
    finally:
        _ACTIVE = prev


def backward(loss: Tensor):
    if loss._tape is None:
        raise RuntimeError("no tape: loss was computed outside a recording() block")
    loss._tape.backward(loss)


def record_op(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap ``data`` as the output of an op on ``inputs``.

    ``backward_fn(g)`` must return one gradient (or None) per input.
    """
    if CHECK_FINITE and not np.isfinite(data).all():
        raise FloatingPointError("non-finite values in forward pass")
    out = Tensor(data)
    if _ACTIVE is not None and any(t.requires_grad for t in inputs):
        _ACTIVE.record(out, tuple(inputs), backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(*shapes):
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError:
        raise ShapeError(f"shapes {shapes} do not broadcast") from None


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.shape, b.shape)
    return record_op(a.data + b.data, (a, b),
                     lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.shape, b.shape)
    return record_op(a.data * b.data, (a, b),
                     lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    return record_op(a.data * c, (a,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return record_op(np.where(keep, x.data, 0.0), (x,), lambda g: (g * keep,))


def expand(x: Tensor, shape) -> Tensor:
    _check_broadcast(x.shape, shape)
    return record_op(np.broadcast_to(x.data, shape).copy(), (x,), lambda g: (_unbroadcast(g, x.shape),))


# -- shape ------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from None
    return record_op(out, (x,), lambda g: (g.reshape(x.shape),))


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    return record_op(np.swapaxes(x.data, a, b), (x,), lambda g: (np.swapaxes(g, a, b),))


def concat_last_dim(xs: Sequence[Tensor]) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise ShapeError("concat of zero tensors")
    lead = xs[0].shape[:-1]
    if any(x.shape[:-1] != lead for x in xs):
        raise ShapeError(f"concat leading shapes differ: {[x.shape for x in xs]}")
    bounds = np.cumsum([0] + [x.shape[-1] for x in xs])

    def bw(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return record_op(np.concatenate([x.data for x in xs], axis=-1), xs, bw)


# -- reductions -------------------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record_op(out, (x,), bw)


def mean(x: Tensor) -> Tensor:
    return scale(sum(x), 1.0 / x.data.size)


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    _check_broadcast(a.shape[:-2], b.shape[:-2])

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return record_op(a.data @ b.data, (a, b), bw)


def linear(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """``x @ W + b``; W is (d_in, d_out) or stacked (..., d_in, d_out)."""
    if x.ndim < 2 or W.ndim < 2 or x.shape[-1] != W.shape[-2]:
        raise ShapeError(f"linear shape mismatch {x.shape} @ {W.shape}")
    out = x.data @ W.data
    if b is not None:
        if b.shape[-1] != W.shape[-1]:
            raise ShapeError(f"bias {b.shape} does not match weight {W.shape}")
        out = out + b.data
    inputs = (x, W) if b is None else (x, W, b)

    def bw(g):
        gx = _unbroadcast(g @ np.swapaxes(W.data, -1, -2), x.shape)
        gW = _unbroadcast(np.swapaxes(x.data, -1, -2) @ g, W.shape)
        return (gx, gW) if b is None else (gx, gW, _unbroadcast(g, b.shape))

    return record_op(out, inputs, bw)


# -- normalisation / regularisation -----------------------------------------

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    d = x.shape[-1]
    if gamma.shape[-1] != d or beta.shape[-1] != d:
        raise ShapeError(f"layer_norm params {gamma.shape}/{beta.shape} vs input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        gxhat = g * gamma.data
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return gx, _unbroadcast(g * xhat, gamma.shape), _unbroadcast(g, beta.shape)

    return record_op(out, (x, gamma, beta), bw)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator used for dropout."""
    return np.random.Generator(np.random.Philox(key=seed))


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], train: bool) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout p must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return record_op(x.data * keep, (x,), lambda g: (g * keep,))


# -- attention / loss -------------------------------------------------------

def masked_softmax(scores: Tensor, mask) -> Tensor:
    """Softmax over the last axis restricted to ``mask`` (True = admissible).

    Masked slots are excluded before exponentiation and come out exactly 0, so
    no gradient reaches them.
    """
    mask = np.asarray(mask, dtype=bool)
    try:
        mask = np.broadcast_to(mask, scores.shape)
    except ValueError:
        raise ShapeError(f"mask {mask.shape} does not broadcast to scores {scores.shape}") from None
    if not mask.any(axis=-1).all():
        raise MaskError("attention row with no admissible position")
    s = np.where(mask, scores.data, -np.inf)
    s = s - s.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(s), 0.0)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return record_op(y, (scores,), bw)


def cross_entropy(logits: Tensor, targets, weights=None, ignore_index: int = -1) -> Tensor:
    """Mean negative log-likelihood over rows whose target != ignore_index.

    With per-class ``weights`` the mean is weighted (sum w_y * nll / sum w_y).
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (N, C) logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    n, c = logits.shape
    if len(targets) != n:
        raise ShapeError(f"{len(targets)} targets for {n} rows")
    keep = targets != ignore_index
    if ((targets[keep] < 0) | (targets[keep] >= c)).any():
        raise ValueError(f"targets must lie in [0, {c})")
    if not keep.any():
        raise ValueError("cross_entropy with every target ignored")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.nonzero(keep)[0]
    w = np.zeros(n)
    w[rows] = 1.0 if weights is None else np.asarray(weights, dtype=np.float64)[targets[rows]]
    denom = w.sum()
    loss = -(w[rows] * logp[rows, targets[rows]]).sum() / denom

    def bw(g):
        p = np.exp(logp)
        p[rows, targets[rows]] -= 1.0
        return (g * p * (w / denom)[:, None],)

    return record_op(np.asarray(loss), (logits,), bw)


# -- optimisation -----------------------------------------------------------

def zero_grads(params: Sequence[Parameter]):
    for p in params:
        p.zero_grad()


def adam_step(params: Sequence[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, t: int = 1):
    """In-place Adam update with bias correction.

    First/second moment estimates live on the parameters (``adam_m``/``adam_v``).
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if t < 1:
        raise ValueError(f"step count t must be >= 1, got {t}")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p in params:
        if getattr(p, "adam_m", None) is None:
            p.adam_m = np.zeros_like(p.data)
            p.adam_v = np.zeros_like(p.data)
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad * p.grad
        p.data = p.data - lr * (p.adam_m / c1) / (np.sqrt(p.adam_v / c2) + eps)


# -- gradient checking ------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: dict  # parameter name -> max elementwise relative error
    tol: float

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


def grad_check(forward: Callable[[], Tensor], params: Sequence[Parameter], h: float = 1e-5,
               tol: float = 1e-4, floor: float = 1e-6) -> GradCheckReport:
    """Compare tape gradients with central differences.

    The relative error of one element is |a - n| / max(|a|, |n|, floor), so
    gradients smaller than ``floor`` are judged on absolute error.
    """
    f0 = forward().item()
    if forward().item() != f0:
        raise NonDeterministicError("forward gives different values on repeated evaluation")
    zero_grads(params)
    with recording():
        loss = forward()
    backward(loss)
    errors = {}
    for p in params:
        analytic = p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)  # view
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = forward().item()
            flat[i] = orig - h
            fm = forward().item()
            flat[i] = orig
            numeric.reshape(-1)[i] = (fp - fm) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        errors[p.name] = float((np.abs(analytic - numeric) / denom).max()) if p.data.size else 0.0
    return GradCheckReport(errors, tol)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))
