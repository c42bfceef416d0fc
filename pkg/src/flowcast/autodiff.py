"""Reverse-mode automatic differentiation over dense float64 arrays.

Every operation records its parents and a backward closure on the output
tensor. Node ids increase with creation order, so sorting a reachable set
by id gives a topological order for free: a backward pass seeds the loss
gradient and replays the closures in reverse creation order, visiting each
node exactly once.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import expit

# When enabled, every forward op asserts its result is finite. Off by
# default; tests and debugging turn it on.
CHECK_FINITE = False

_node_ids = itertools.count()


class Tensor:
    """Dense float64 array participating in a computation graph.

    Leaf tensors wrap raw data; tensors produced by ops carry the parent
    references and backward closure needed for reverse-mode accumulation.
    ``grad`` stays ``None`` until a backward pass touches the tensor.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._backward = _backward
        if CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("tensor holds non-finite values")

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

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the module-level functions do the work.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape):
        return reshape(self, shape)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    def backward(self):
        backward(self)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add a gradient contribution, skipping constants the graph never needs."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on.

    Gradients accumulate into existing ``grad`` buffers, so callers zero
    parameter gradients between passes.
    """
    if loss.data.ndim != 0:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    seen = set()
    stack = [loss]
    nodes = []
    while stack:
        t = stack.pop()
        if t.node_id in seen or not t.requires_grad:
            continue
        seen.add(t.node_id)
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t.node_id, reverse=True)
    _accumulate(loss, np.ones_like(loss.data))
    if not loss.requires_grad:
        return
    for t in nodes:
        if t._backward is not None:
            t._backward(t.grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shapes differ: {a.data.shape} vs {b.data.shape}")


def _finite(out: np.ndarray) -> np.ndarray:
    if CHECK_FINITE and not np.all(np.isfinite(out)):
        raise FloatingPointError("forward op produced non-finite values")
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: incompatible shapes: {a.data.shape} @ {b.data.shape}")
    out = _finite(a.data @ b.data)

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return Tensor(out, _parents=(a, b), _backward=bwd)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("add", a, b)

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor(_finite(a.data + b.data), _parents=(a, b), _backward=bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("sub", a, b)

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return Tensor(_finite(a.data - b.data), _parents=(a, b), _backward=bwd)


def mul(a, b) -> Tensor:
    """Element-wise product (the usual Hadamard product on equal shapes)."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("mul", a, b)

    def bwd(g):
        _accumulate(a, b.data * g)
        _accumulate(b, a.data * g)

    return Tensor(_finite(a.data * b.data), _parents=(a, b), _backward=bwd)


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    c = float(c)

    def bwd(g):
        _accumulate(x, c * g)

    return Tensor(_finite(c * x.data), _parents=(x,), _backward=bwd)


def add_bias(x, v) -> Tensor:
    """Add a vector along the leading axis, broadcast over trailing axes."""
    x, v = _as_tensor(x), _as_tensor(v)
    if v.data.ndim != 1 or x.data.ndim < 1 or v.data.shape[0] != x.data.shape[0]:
        raise ValueError(f"add_bias: vector {v.data.shape} does not fit axis 0 of {x.data.shape}")
    vb = v.data.reshape((-1,) + (1,) * (x.data.ndim - 1))

    def bwd(g):
        _accumulate(x, g)
        _accumulate(v, g.sum(axis=tuple(range(1, g.ndim))) if g.ndim > 1 else g)

    return Tensor(_finite(x.data + vb), _parents=(x, v), _backward=bwd)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    y = expit(x.data)

    def bwd(g):
        _accumulate(x, y * (1.0 - y) * g)

    return Tensor(_finite(y), _parents=(x,), _backward=bwd)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    y = np.tanh(x.data)

    def bwd(g):
        _accumulate(x, (1.0 - y * y) * g)

    return Tensor(_finite(y), _parents=(x,), _backward=bwd)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    # Subgradient at 0 is taken as 0.
    keep = x.data > 0.0

    def bwd(g):
        _accumulate(x, np.where(keep, g, 0.0))

    return Tensor(_finite(np.where(keep, x.data, 0.0)), _parents=(x,), _backward=bwd)


def conv1d_same(signal, kernels, bias) -> Tensor:
    """Same-length cross-correlation along axis 1 of ``signal``.

    ``signal`` is [c_in, p, *rest], ``kernels`` [c_out, c_in, k], ``bias``
    [c_out]; trailing axes of the signal ride along unchanged (time steps,
    batch). Zero padding splits as left = (k-1)//2, right = k-1-left, so
    the output keeps length p. No kernel flip.
    """
    signal, kernels, bias = _as_tensor(signal), _as_tensor(kernels), _as_tensor(bias)
    if signal.data.ndim < 2:
        raise ValueError(f"conv1d_same: signal needs [c_in, p, ...], got {signal.data.shape}")
    if kernels.data.ndim != 3:
        raise ValueError(f"conv1d_same: kernels need [c_out, c_in, k], got {kernels.data.shape}")
    c_in, p = signal.data.shape[0], signal.data.shape[1]
    rest = signal.data.shape[2:]
    c_out, kc_in, k = kernels.data.shape
    if kc_in != c_in:
        raise ValueError(
            f"conv1d_same: channel mismatch: signal {signal.data.shape} vs kernels {kernels.data.shape}"
        )
    if bias.data.shape != (c_out,):
        raise ValueError(f"conv1d_same: bias {bias.data.shape} does not match {c_out} output channels")
    left = (k - 1) // 2
    if k > p + (k - 1):
        raise ValueError(f"conv1d_same: kernel size {k} exceeds padded signal length {p + k - 1}")

    padded = np.zeros((c_in, p + k - 1) + rest)
    padded[:, left:left + p] = signal.data
    out = np.empty((c_out, p) + rest)
    for o in range(c_out):
        acc = np.full((p,) + rest, bias.data[o])
        for c in range(c_in):
            for j in range(k):
                acc += kernels.data[o, c, j] * padded[c, j:j + p]
        out[o] = acc

    def bwd(g):
        kg = np.zeros_like(kernels.data)
        bg = np.empty(c_out)
        pg = np.zeros_like(padded)
        for o in range(c_out):
            bg[o] = g[o].sum()
            for c in range(c_in):
                for j in range(k):
                    kg[o, c, j] = (g[o] * padded[c, j:j + p]).sum()
                    pg[c, j:j + p] += kernels.data[o, c, j] * g[o]
        _accumulate(kernels, kg)
        _accumulate(bias, bg)
        _accumulate(signal, pg[:, left:left + p])

    return Tensor(_finite(out), _parents=(signal, kernels, bias), _backward=bwd)


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ValueError("concat: empty part list")
    base = list(parts[0].data.shape)
    for t in parts[1:]:
        other = list(t.data.shape)
        if len(other) != len(base) or any(
            i != axis and other[i] != base[i] for i in range(len(base))
        ):
            raise ValueError(
                f"concat: incompatible shapes {parts[0].data.shape} vs {t.data.shape} on axis {axis}"
            )
    extents = [t.data.shape[axis] for t in parts]
    offsets = np.cumsum([0] + extents)

    def bwd(g):
        for t, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return Tensor(
        _finite(np.concatenate([t.data for t in parts], axis=axis)),
        _parents=tuple(parts),
        _backward=bwd,
    )


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    x = _as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def bwd(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        _accumulate(x, full)

    return Tensor(x.data[idx].copy(), _parents=(x,), _backward=bwd)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    shape = tuple(shape)

    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    return Tensor(x.data.reshape(shape).copy(), _parents=(x,), _backward=bwd)


def tensor_sum(x) -> Tensor:
    x = _as_tensor(x)

    def bwd(g):
        _accumulate(x, np.broadcast_to(g, x.data.shape).copy())

    return Tensor(x.data.sum(), _parents=(x,), _backward=bwd)


def tensor_mean(x) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size
    if n == 0:
        raise ValueError("mean of an empty tensor")

    def bwd(g):
        _accumulate(x, np.broadcast_to(g / n, x.data.shape).copy())

    return Tensor(x.data.mean(), _parents=(x,), _backward=bwd)
