"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every differentiable function in this module accepts either a plain
``numpy.ndarray`` (or scalar) or a :class:`Tensor`. When no argument is a
tensor the call falls straight through to NumPy, so the same numerical code
serves fast rollouts and gradient computation.
"""
from __future__ import annotations

import itertools

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes cannot be composed."""


class ContractError(RuntimeError):
    """Raised when an autodiff precondition is violated."""


_ids = itertools.count()


class Tensor:
    """A node on the autodiff tape.

    Parameters
    ----------
    data : array_like
        Values, stored as a float64 array.
    requires_grad : bool
        Whether gradients should be propagated into this node.
    """

    __array_ufunc__ = None  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    @property
    def T(self):
        return transpose(self)

    # operators ---------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    # ------------------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable leaf."""
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar, got shape {self.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
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

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


class Parameter(Tensor):
    """A trainable leaf tensor with a process-unique id."""

    def __init__(self, data):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.id = next(_ids)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter(id={self.id}, shape={self.shape})"


# ----------------------------------------------------------------------
# helpers


def is_tensor(x):
    return isinstance(x, Tensor)


def value(x):
    """Underlying array of a tensor, or the argument itself as an array."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_grad(*xs):
    return any(isinstance(x, Tensor) and x.requires_grad for x in xs)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary_shape(a, b):
    try:
        return np.broadcast_shapes(np.shape(a), np.shape(b))
    except ValueError as exc:
        raise DimensionError(
            f"cannot broadcast shapes {np.shape(a)} and {np.shape(b)}") from exc


def _node(out, parents, backward):
    parents = tuple(p for p in parents)
    req = _needs_grad(*parents)
    return Tensor(out, requires_grad=req,
                  _parents=tuple(as_tensor(p) for p in parents) if req else (),
                  _backward=backward if req else None)


# ----------------------------------------------------------------------
# elementwise binary


def add(a, b):
    if not (is_tensor(a) or is_tensor(b)):
        return np.add(a, b)
    _binary_shape(value(a), value(b))
    sa, sb = np.shape(value(a)), np.shape(value(b))
    return _node(value(a) + value(b), (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    if not (is_tensor(a) or is_tensor(b)):
        return np.subtract(a, b)
    _binary_shape(value(a), value(b))
    sa, sb = np.shape(value(a)), np.shape(value(b))
    return _node(value(a) - value(b), (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    if not (is_tensor(a) or is_tensor(b)):
        return np.multiply(a, b)
    _binary_shape(value(a), value(b))
    va, vb = value(a), value(b)
    return _node(va * vb, (a, b),
                 lambda g: (_unbroadcast(g * vb, va.shape), _unbroadcast(g * va, vb.shape)))


def div(a, b):
    if not (is_tensor(a) or is_tensor(b)):
        return np.divide(a, b)
    _binary_shape(value(a), value(b))
    va, vb = value(a), value(b)
    out = va / vb
    return _node(out, (a, b),
                 lambda g: (_unbroadcast(g / vb, va.shape),
                            _unbroadcast(-g * out / vb, vb.shape)))


def neg(a):
    if not is_tensor(a):
        return np.negative(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def power(a, exponent):
    """``a ** exponent`` for a constant exponent."""
    if is_tensor(exponent):
        raise ContractError("power() supports constant exponents only")
    if not is_tensor(a):
        return np.power(a, exponent)
    va = a.data
    return _node(va ** exponent, (a,), lambda g: (g * exponent * va ** (exponent - 1),))


def maximum(a, b):
    if not (is_tensor(a) or is_tensor(b)):
        return np.maximum(a, b)
    va, vb = value(a), value(b)
    pick_a = va >= vb
    return _node(np.maximum(va, vb), (a, b),
                 lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), va.shape),
                            _unbroadcast(np.where(pick_a, 0.0, g), vb.shape)))


# ----------------------------------------------------------------------
# elementwise unary


def exp(a):
    if not is_tensor(a):
        return np.exp(a)
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a):
    if not is_tensor(a):
        return np.log(a)
    va = a.data
    return _node(np.log(va), (a,), lambda g: (g / va,))


def sqrt(a):
    if not is_tensor(a):
        return np.sqrt(a)
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a):
    if not is_tensor(a):
        return np.tanh(a)
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def arctanh(a):
    if not is_tensor(a):
        return np.arctanh(a)
    va = a.data
    return _node(np.arctanh(va), (a,), lambda g: (g / (1.0 - va * va),))


def sin(a):
    if not is_tensor(a):
        return np.sin(a)
    va = a.data
    return _node(np.sin(va), (a,), lambda g: (g * np.cos(va),))


def cos(a):
    if not is_tensor(a):
        return np.cos(a)
    va = a.data
    return _node(np.cos(va), (a,), lambda g: (-g * np.sin(va),))


def arcsin(a):
    if not is_tensor(a):
        return np.arcsin(a)
    va = a.data
    return _node(np.arcsin(va), (a,), lambda g: (g / np.sqrt(1.0 - va * va),))


def arctan2(y, x):
    if not (is_tensor(y) or is_tensor(x)):
        return np.arctan2(y, x)
    vy, vx = value(y), value(x)
    r2 = vx * vx + vy * vy
    return _node(np.arctan2(vy, vx), (y, x),
                 lambda g: (_unbroadcast(g * vx / r2, vy.shape),
                            _unbroadcast(-g * vy / r2, vx.shape)))


def relu(a):
    if not is_tensor(a):
        return np.maximum(a, 0.0)
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def softplus(a):
    if not is_tensor(a):
        return np.logaddexp(0.0, a)
    va = a.data
    sig = 0.5 * (1.0 + np.tanh(0.5 * va))
    return _node(np.logaddexp(0.0, va), (a,), lambda g: (g * sig,))


def absolute(a):
    if not is_tensor(a):
        return np.abs(a)
    sign = np.sign(a.data)
    return _node(np.abs(a.data), (a,), lambda g: (g * sign,))


def clip(a, lo, hi):
    """Saturate to ``[lo, hi]``; gradient is zero where saturated."""
    if not is_tensor(a):
        return np.clip(a, lo, hi)
    va = a.data
    inside = (va >= lo) & (va <= hi)
    return _node(np.clip(va, lo, hi), (a,), lambda g: (_unbroadcast(g * inside, va.shape),))


# ----------------------------------------------------------------------
# reductions and shape


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    if not is_tensor(a):
        return np.sum(a, axis=axis, keepdims=keepdims)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), back)


def mean(a, axis=None, keepdims=False):
    if not is_tensor(a):
        return np.mean(a, axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a, shape):
    if not is_tensor(a):
        return np.reshape(a, shape)
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a):
    """Swap the last two axes."""
    if not is_tensor(a):
        return np.swapaxes(a, -1, -2)
    return _node(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def getitem(a, index):
    if not is_tensor(a):
        return np.asarray(a)[index]
    shape = a.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return _node(a.data[index], (a,), back)


def stack(items, axis=0):
    if not any(is_tensor(x) for x in items):
        return np.stack(items, axis=axis)
    vals = [value(x) for x in items]
    out = np.stack(vals, axis=axis)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(vals)))

    return _node(out, tuple(items), back)


def concat(items, axis=-1):
    if not any(is_tensor(x) for x in items):
        return np.concatenate(items, axis=axis)
    vals = [value(x) for x in items]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    cuts = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _node(out, tuple(items), back)


def where(cond, a, b):
    """Elementwise select with a constant boolean mask."""
    cond = np.asarray(cond, dtype=bool)
    if not (is_tensor(a) or is_tensor(b)):
        return np.where(cond, a, b)
    va, vb = value(a), value(b)
    return _node(np.where(cond, va, vb), (a, b),
                 lambda g: (_unbroadcast(np.where(cond, g, 0.0), va.shape),
                            _unbroadcast(np.where(cond, 0.0, g), vb.shape)))


def matmul(a, b):
    va, vb = value(a), value(b)
    if va.ndim == 0 or vb.ndim == 0:
        raise DimensionError("matmul needs at least 1-d operands")
    if va.shape[-1] != (vb.shape[0] if vb.ndim == 1 else vb.shape[-2]):
        raise DimensionError(f"matmul shape mismatch {va.shape} @ {vb.shape}")
    if not (is_tensor(a) or is_tensor(b)):
        return va @ vb
    if va.ndim == 1 or vb.ndim == 1:
        raise DimensionError("differentiable matmul needs operands with ndim >= 2")

    def back(g):
        ga = g @ np.swapaxes(vb, -1, -2)
        gb = np.swapaxes(va, -1, -2) @ g
        return _unbroadcast(ga, va.shape), _unbroadcast(gb, vb.shape)

    return _node(va @ vb, (a, b), back)


def norm(a, axis=-1, keepdims=False):
    """Euclidean norm along ``axis`` with a zero subgradient at the origin."""
    if not is_tensor(a):
        return np.linalg.norm(a, axis=axis, keepdims=keepdims)
    va = a.data
    n = np.sqrt(np.sum(va * va, axis=axis, keepdims=True))
    safe = np.where(n > 0, n, 1.0)
    out = n if keepdims else np.squeeze(n, axis=axis)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * np.where(n > 0, va / safe, 0.0),)

    return _node(out, (a,), back)


def cross(a, b):
    """Cross product along the last axis (length 3)."""
    if not (is_tensor(a) or is_tensor(b)):
        return np.cross(a, b)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def dot(a, b, axis=-1, keepdims=False):
    return sum(mul(a, b), axis=axis, keepdims=keepdims)
