"""Minimal reverse-mode autodiff on dense numpy arrays.

A global tape records every primitive applied to tensors that require
gradients; ``backward`` replays the tape in reverse execution order
(which is a valid reverse topological order, since operations are
recorded as they run). Complex arithmetic lives in ``complex_ops`` and
is composed entirely from these real primitives, so no primitive here
needs a complex-valued adjoint.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "Tensor",
    "Tape",
    "tensor",
    "no_grad",
    "backward",
    "matmul",
    "concat",
    "softmax",
    "gelu",
    "dropout",
    "conv1d",
    "adaptive_avg_pool",
    "AdamState",
    "adam_step",
    "dropout_rng",
]

_SQRT2 = math.sqrt(2.0)


class Tape:
    """Ordered record of primitive applications for reverse-mode replay."""

    def __init__(self):
        self.nodes = []

    def append(self, node):
        self.nodes.append(node)

    def clear(self):
        self.nodes.clear()

    def __len__(self):
        return len(self.nodes)


# Tape stack: the top entry receives new nodes; None disables recording.
_tape_stack: list[Tape | None] = [Tape()]


def active_tape() -> Tape | None:
    return _tape_stack[-1]


@contextmanager
def no_grad():
    _tape_stack.append(None)
    try:
        yield
    finally:
        _tape_stack.pop()


@contextmanager
def use_tape(tape: Tape):
    _tape_stack.append(tape)
    try:
        yield tape
    finally:
        _tape_stack.pop()


@dataclass
class _Node:
    inputs: tuple
    output: "Tensor"
    backward_fn: object  # callable(grad_out) -> tuple of input grads (or None)


class Tensor:
    """Dense real tensor with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else np.float64)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data.copy())

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={'yes' if self.requires_grad else 'no'})"

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(inputs, out_data, backward_fn):
    # intermediate results carry requires_grad=True once recorded, so the
    # flag check covers both leaves and taped values
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None and any(
        isinstance(t, Tensor) and t.requires_grad for t in inputs
    ):
        out.requires_grad = True
        tape.append(_Node(inputs=tuple(inputs), output=out, backward_fn=backward_fn))
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor, tape: Tape | None = None):
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on."""
    tape = tape if tape is not None else active_tape()
    if tape is None:
        raise RuntimeError("backward called with no active tape")
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g_out = grads.pop(id(node.output), None)
        if g_out is None:
            continue
        in_grads = node.backward_fn(g_out)
        for t, g in zip(node.inputs, in_grads):
            if g is None or not isinstance(t, Tensor):
                continue
            if not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
    # whatever is left belongs to leaves
    for node in tape.nodes:
        for t in node.inputs:
            if isinstance(t, Tensor) and id(t) in grads:
                _accumulate(t, grads.pop(id(t)))
    if id(loss) in grads:
        _accumulate(loss, grads.pop(id(loss)))


# --------------------------------------------------------------------------
# elementwise / structural primitives
# --------------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record((a, b), out, bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record((a, b), out, bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record((a, b), out, bwd)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def bwd(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _record((a, b), out, bwd)


def scale(a, c: float):
    a = _as_tensor(a)
    c = float(c)

    def bwd(g):
        return (g * c,)

    return _record((a,), a.data * c, bwd)


def texp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _record((a,), out, bwd)


def tcos(a):
    a = _as_tensor(a)

    def bwd(g):
        return (-g * np.sin(a.data),)

    return _record((a,), np.cos(a.data), bwd)


def tsin(a):
    a = _as_tensor(a)

    def bwd(g):
        return (g * np.cos(a.data),)

    return _record((a,), np.sin(a.data), bwd)


def square(a):
    a = _as_tensor(a)

    def bwd(g):
        return (2.0 * g * a.data,)

    return _record((a,), a.data * a.data, bwd)


def tsqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)

    def bwd(g):
        return (g / (2.0 * out),)

    return _record((a,), out, bwd)


def tabs(a):
    a = _as_tensor(a)

    def bwd(g):
        return (g * np.sign(a.data),)

    return _record((a,), np.abs(a.data), bwd)


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record((a,), out, bwd)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(a.shape),)

    return _record((a,), out, bwd)


def transpose(a, axes=None):
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def bwd(g):
        return (np.transpose(g, inv),)

    return _record((a,), out, bwd)


def getitem(a, idx):
    a = _as_tensor(a)
    out = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record((a,), out, bwd)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(tuple(tensors), out, bwd)


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        parts = np.split(g, len(tensors), axis=axis)
        return tuple(p.reshape(t.shape) for p, t in zip(parts, tensors))

    return _record(tuple(tensors), out, bwd)


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------

def _matmul2(a: Tensor, b: Tensor) -> Tensor:
    out = np.matmul(a.data, b.data)

    def bwd(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record((a, b), out, bwd)


def matmul(a, b):
    """np.matmul with broadcasting over leading batch axes; 1-d operands
    follow the usual vector conventions."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ValueError("matmul requires at least 1-d operands")
    if a.shape[-1] != (b.shape[-2] if b.ndim > 1 else b.shape[0]):
        raise ValueError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    a2 = reshape(a, (1, a.shape[0])) if a.ndim == 1 else a
    b2 = reshape(b, (b.shape[0], 1)) if b.ndim == 1 else b
    out = _matmul2(a2, b2)
    if a.ndim == 1 and b.ndim == 1:
        return reshape(out, ())
    if a.ndim == 1:
        return reshape(out, out.shape[:-2] + out.shape[-1:])
    if b.ndim == 1:
        return reshape(out, out.shape[:-1])
    return out


# --------------------------------------------------------------------------
# neural-net primitives
# --------------------------------------------------------------------------

def softmax(x, axis=-1):
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _record((x,), out, bwd)


def gelu(x):
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    x = _as_tensor(x)
    phi = 0.5 * (1.0 + special.erf(x.data / _SQRT2))
    out = x.data * phi

    def bwd(g):
        pdf = np.exp(-0.5 * x.data * x.data) / math.sqrt(2.0 * math.pi)
        return (g * (phi + x.data * pdf),)

    return _record((x,), out, bwd)


def dropout_rng(seed: int, layer_id: int, step: int) -> np.random.Generator:
    """Counter-based generator so a given (seed, layer, step) replays exactly."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[layer_id, step, 0, 0]))


def dropout(x, rate: float, rng: np.random.Generator | None, training: bool):
    x = _as_tensor(x)
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.data.dtype) / keep

    def bwd(g):
        return (g * mask,)

    return _record((x,), x.data * mask, bwd)


def conv1d(x, weight, bias=None, padding=0):
    """1-d convolution (cross-correlation) over the last axis.

    x: (..., C_in, L), weight: (C_out, C_in, k), bias: (C_out,) or None.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    c_out, c_in, k = weight.shape
    if x.shape[-2] != c_in:
        raise ValueError(f"conv1d channel mismatch: input {x.shape} vs weight {weight.shape}")
    pad = [(0, 0)] * (x.ndim - 1) + [(padding, padding)]
    xp = np.pad(x.data, pad)
    L_out = xp.shape[-1] - k + 1
    # windows: (..., C_in, L_out, k)
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)
    out = np.einsum("...ilk,oik->...ol", win, weight.data, optimize=True)
    if bias is not None:
        bias = _as_tensor(bias)
        out = out + bias.data[..., :, None]

    def bwd(g):
        gw = np.einsum("...ol,...ilk->oik", g, win, optimize=True)
        # grad wrt padded input: correlate g with flipped kernels
        gp = np.zeros_like(xp)
        gpad = np.pad(g, [(0, 0)] * (g.ndim - 1) + [(k - 1, k - 1)])
        gwin = np.lib.stride_tricks.sliding_window_view(gpad, k, axis=-1)
        wflip = weight.data[:, :, ::-1]
        gp += np.einsum("...olk,oik->...il", gwin, wflip, optimize=True)
        gx = gp[..., padding : padding + x.shape[-1]] if padding else gp
        gb = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 2)) if bias is not None else None
        if bias is not None:
            return gx, gw, gb
        return gx, gw

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record(inputs, out, bwd)


def adaptive_avg_pool(x, target_len: int):
    """Average pooling over the last axis to ``target_len`` bins (torch binning)."""
    x = _as_tensor(x)
    L = x.shape[-1]
    starts = [(i * L) // target_len for i in range(target_len)]
    ends = [-(-((i + 1) * L) // target_len) for i in range(target_len)]
    out = np.stack(
        [x.data[..., s:e].mean(axis=-1) for s, e in zip(starts, ends)], axis=-1
    )

    def bwd(g):
        gx = np.zeros_like(x.data)
        for i, (s, e) in enumerate(zip(starts, ends)):
            gx[..., s:e] += g[..., i : i + 1] / (e - s)
        return (gx,)

    return _record((x,), out, bwd)


# --------------------------------------------------------------------------
# Adam
# --------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """In-place Adam update with bias correction; skips params without grads."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
