"""Dense float64 tensors with tape-based reverse-mode differentiation.

A Tensor wraps a float64 ndarray. While a GradTape is active (``with
GradTape() as tape:``), every operation on a grad-requiring tensor records
its backward rule onto the tape in execution order; ``backward(loss, tape)``
replays the tape in reverse and accumulates gradients into ``.grad``.
Without an active tape, operations run forward-only.
"""

import os

import numpy as np
from scipy.special import erf

from churnforge.errors import ShapeError

# When true, every op asserts its output is finite. Slow; meant for tests
# and debugging, enable via CHURNFORGE_CHECK_FINITE=1 or set directly.
CHECK_FINITE = os.environ.get("CHURNFORGE_CHECK_FINITE") == "1"

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

_active_tape = None


class Tensor:
    """Dense float64 array with optional gradient participation."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else None

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all arithmetic routes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


class GradTape:
    """Ordered record of operations for one forward pass.

    Forward execution order is a topological order of the graph, so
    replaying the records in reverse propagates gradients correctly.
    A tape is confined to one worker and is discarded after its step;
    gradient accumulation across steps only happens if the caller keeps
    ``.grad`` buffers alive deliberately.
    """

    def __init__(self):
        self.records = []  # (out, inputs, backward_fn)

    def __enter__(self):
        global _active_tape
        if _active_tape is not None:
            raise RuntimeError("GradTape already active; tapes do not nest")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _active_tape
        _active_tape = None
        return False

    def __len__(self):
        return len(self.records)


def active_tape():
    return _active_tape


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _finalize(out_data, inputs, backward_fn):
    """Create the output tensor, recording onto the active tape if needed."""
    if CHECK_FINITE and not np.all(np.isfinite(out_data)):
        raise FloatingPointError("non-finite value produced by forward op")
    tracked = _active_tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=tracked)
    if tracked:
        _active_tape.records.append((out, inputs, backward_fn))
    return out


def backward(loss, tape):
    """Replay the tape in reverse, writing gradients of ``loss``.

    Every requires_grad tensor reachable from the loss accumulates its
    gradient into ``.grad``; tensors not on a path to the loss are left
    untouched.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.data)
    for out, inputs, backward_fn in reversed(tape.records):
        if out.grad is None:
            continue
        grads = backward_fn(out.grad)
        for t, g in zip(inputs, grads):
            if g is None or not t.requires_grad:
                continue
            t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _finalize(out, (a, b), bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _finalize(out, (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _finalize(out, (a, b), bwd)


def pow_const(a, p):
    """a ** p for a constant float exponent."""
    a = _as_tensor(a)
    out = a.data**p

    def bwd(g):
        return (g * p * a.data ** (p - 1),)

    return _finalize(out, (a,), bwd)


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _finalize(out, (a,), bwd)


def log(a):
    a = _as_tensor(a)
    out = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _finalize(out, (a,), bwd)


def relu(a):
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def bwd(g):
        return (g * (a.data > 0.0),)

    return _finalize(out, (a,), bwd)


def gelu(a):
    """Exact Gaussian-error-function GELU."""
    a = _as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = a.data * cdf

    def bwd(g):
        pdf = np.exp(-0.5 * a.data * a.data) * _INV_SQRT2PI
        return (g * (cdf + a.data * pdf),)

    return _finalize(out, (a,), bwd)


def sigmoid(a):
    a = _as_tensor(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out[~pos] = ez / (1.0 + ez)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _finalize(out, (a,), bwd)


def tanh(a):
    a = _as_tensor(a)
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _finalize(out, (a,), bwd)


def matmul(a, b):
    """Matrix product over the last two axes.

    Supports 2-D x 2-D, N-D x 2-D (shared right operand, e.g. a dense layer
    applied per time step), and N-D x N-D with identical leading axes.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    if b.ndim == 2:
        out = a.data @ b.data

        def bwd(g):
            k, n = b.data.shape
            da = g @ b.data.T
            db = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            return da, db

        return _finalize(out, (a, b), bwd)
    if a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2]:
        out = np.matmul(a.data, b.data)

        def bwd(g):
            da = np.matmul(g, b.data.swapaxes(-1, -2))
            db = np.matmul(a.data.swapaxes(-1, -2), g)
            return da, db

        return _finalize(out, (a, b), bwd)
    raise ShapeError(f"matmul leading dimensions disagree: {a.shape} x {b.shape}")


def reshape(a, shape):
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(a.data.shape),)

    return _finalize(out, (a,), bwd)


def transpose(a, axes):
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def bwd(g):
        return (np.transpose(g, inv),)

    return _finalize(out, (a,), bwd)


def broadcast_to(a, shape):
    a = _as_tensor(a)
    out = np.broadcast_to(a.data, shape).copy()

    def bwd(g):
        return (_unbroadcast(g, a.data.shape),)

    return _finalize(out, (a,), bwd)


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _finalize(out, tuple(tensors), bwd)


def narrow(a, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    a = _as_tensor(a)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = a.data[idx].copy()

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _finalize(out, (a,), bwd)


def sum_(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _finalize(out, (a,), bwd)


def mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.data.shape).copy(),)

    return _finalize(out, (a,), bwd)
