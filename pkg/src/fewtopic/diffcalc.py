"""Minimal reverse-mode differentiation over dense float64 arrays.

Every operation records its inputs and a closure mapping the output
gradient to input gradients.  :func:`grad` walks the recorded graph in
reverse topological order.  Arrays are at most two-dimensional; scalars
are stored as ``(1, 1)`` arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError, DimensionError

EPS_LOG = 1e-12

__all__ = [
    "EPS_LOG",
    "Tensor",
    "Adam",
    "as_tensor",
    "parameter",
    "grad",
    "matmul",
    "transpose",
    "log",
    "exp",
    "clip_min",
    "relu",
    "softplus",
    "softplus_inverse",
    "concat",
    "take_rows",
    "segment_sum",
    "dense_layer",
    "dropout",
]


def _as_2d(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim > 2:
        raise DimensionError(f"tensors are at most 2-D, got shape {arr.shape}")
    return arr


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    # sum out axes that were broadcast from size 1
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str) -> None:
    for sa, sb in zip(a.shape, b.shape):
        if sa != sb and sa != 1 and sb != 1:
            raise DimensionError(f"{op}: cannot broadcast {a.shape} with {b.shape}")


class Tensor:
    """A node in a computation graph holding a 2-D float64 array."""

    __slots__ = ("data", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = _as_2d(data)
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

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
        return _make(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(value, name=None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def _make(data, parents, backward) -> Tensor:
    track = any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _make(ad * bd, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)

    return _make(out, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        out = np.array([[a.data.sum()]])
    else:
        out = a.data.sum(axis=axis, keepdims=True)
    return _make(out, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / count)


def log(a, eps=EPS_LOG) -> Tensor:
    """Guarded logarithm ``log(max(x, eps))``; zero gradient below the guard."""
    a = as_tensor(a)
    clipped = np.maximum(a.data, eps)
    live = a.data > eps
    return _make(np.log(clipped), (a,), lambda g: (np.where(live, g / clipped, 0.0),))


def clip_min(a, floor) -> Tensor:
    """``max(x, floor)``; gradient flows only where ``x > floor``."""
    a = as_tensor(a)
    live = a.data > floor
    return _make(np.where(live, a.data, floor), (a,), lambda g: (g * live,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def _softplus(x: np.ndarray) -> np.ndarray:
    # x + log1p(exp(-x)) for x > 0 keeps exp from overflowing
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(-np.abs(x))))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = _softplus(x)
    # logistic sigmoid, evaluated without overflow
    ex = np.exp(-np.abs(x))
    sig = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    return _make(out, (a,), lambda g: (g * sig,))


def softplus_inverse(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def concat(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    other = 1 - axis
    ref = tensors[0].shape[other]
    if any(t.shape[other] != ref for t in tensors):
        raise DimensionError(f"concat along axis {axis}: {[t.shape for t in tensors]}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        if axis == 1:
            return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))
        return tuple(g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def take_rows(a, index) -> Tensor:
    """Gather ``a[index]`` (rows may repeat)."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.intp)
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _make(a.data[index], (a,), backward)


def segment_sum(a, index, num_segments) -> Tensor:
    """Scatter-add rows of ``a`` into ``num_segments`` rows keyed by ``index``."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.intp)
    if len(index) != a.shape[0]:
        raise DimensionError(f"segment_sum: {len(index)} keys for {a.shape[0]} rows")
    out = np.zeros((num_segments, a.shape[1]))
    np.add.at(out, index, a.data)
    return _make(out, (a,), lambda g: (g[index],))


def dense_layer(x, weight, bias, activation="identity") -> Tensor:
    """``activation(x @ weight + bias)`` with activation in relu/softplus/identity."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(f"dense_layer: input has {x.shape[1]} columns, weight has {weight.shape[0]} rows")
    out = matmul(x, weight) + bias
    if activation == "relu":
        return relu(out)
    if activation == "softplus":
        return softplus(out)
    if activation == "identity":
        return out
    raise ConfigError(f"unknown activation {activation!r}")


def dropout(x, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, rescale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask


def _toposort(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(loss: Tensor, params) -> list:
    """Gradients of scalar ``loss`` with respect to each tensor in ``params``."""
    if loss.data.size != 1:
        raise ContractError(f"grad needs a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        for node in reversed(_toposort(loss)):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
    return [grads.get(id(p), np.zeros_like(p.data)).copy() for p in params]


class Adam:
    """Adam with bias-corrected moments; updates parameter arrays in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise DimensionError(f"{len(grads)} gradients for {len(self.params)} parameters")
        for p, g in zip(self.params, grads):
            if np.shape(g) != p.shape:
                raise DimensionError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
