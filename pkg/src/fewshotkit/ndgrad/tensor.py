"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` produced by an operation remembers its parents and a
closure that maps the upstream gradient onto them. :func:`backward` sorts the
graph topologically, runs the closures in reverse order, accumulates leaf
gradients into ``.grad`` and then frees the graph.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np

from ..errors import ContractError, DomainError, NumericError, ShapeError
from . import kernels

LOG_EPS = 1e-12
NORM_EPS = 1e-12

_state = {"strict": False, "grad": True}


def set_strict(flag: bool) -> None:
    """Toggle NaN/Inf detection on every forward value and gradient."""
    _state["strict"] = bool(flag)


def is_strict() -> bool:
    return _state["strict"]


@contextlib.contextmanager
def strict_mode(flag: bool = True):
    prev = _state["strict"]
    _state["strict"] = flag
    try:
        yield
    finally:
        _state["strict"] = prev


@contextlib.contextmanager
def no_grad():
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


def _check_finite(arr, what):
    if _state["strict"] and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


class Tensor:
    """Dense float64 array that can take part in a differentiable graph.

    ``decay_exempt`` marks parameters the optimizers must not weight-decay.
    """

    def __init__(self, data, requires_grad=False, name="", decay_exempt=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.decay_exempt = decay_exempt
        self.grad = None
        self.op = None
        self._parents = ()
        self._backward = None
        _check_finite(self.data, f"tensor {name or '<leaf>'}")

    @classmethod
    def _node(cls, data, parents, backward_fn, op):
        out = cls.__new__(cls)
        out.data = data
        out.name = ""
        out.decay_exempt = False
        out.grad = None
        out.op = op
        track = _state["grad"] and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward_fn if track else None
        _check_finite(data, f"output of {op}")
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self.op is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self):
        return relu(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def softmax(self):
        return softmax(self)

    def log_softmax(self):
        return log_softmax(self)

    def l2_normalize(self):
        return l2_normalize(self)

    def broadcast_to(self, shape):
        return broadcast(self, shape)

    @property
    def T(self):
        return transpose(self)

    def backward(self):
        return backward(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return Tensor._node(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return Tensor._node(a.data - b.data, (a, b), bw, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return Tensor._node(a.data * b.data, (a, b), bw, "mul")


def _clamp_denominator(x):
    return np.where(np.abs(x) < LOG_EPS, np.copysign(LOG_EPS, x), x)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    den = _clamp_denominator(b.data)
    out = a.data / den

    def bw(g):
        return (_unbroadcast(g / den, a.shape),
                _unbroadcast(-g * out / den * (np.abs(b.data) >= LOG_EPS), b.shape))
    return Tensor._node(out, (a, b), bw, "div")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D and 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    A = a.data.reshape(1, -1) if a.ndim == 1 else a.data
    B = b.data.reshape(-1, 1) if b.ndim == 1 else b.data

    def bw(g):
        G = g.reshape(A.shape[0], B.shape[1])
        return (G @ B.T).reshape(a.shape), (A.T @ G).reshape(b.shape)
    return Tensor._node(a.data @ b.data, (a, b), bw, "matmul")


def transpose(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {x.shape}")

    def bw(g):
        return (g.T,)
    return Tensor._node(x.data.T.copy(), (x,), bw, "transpose")


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def bw(g):
        return (g * mask,)
    return Tensor._node(np.maximum(x.data, 0.0), (x,), bw, "relu")


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)

    def bw(g):
        return (g * out,)
    return Tensor._node(out, (x,), bw, "exp")


def log(x):
    """Natural log with the argument clamped to at least ``LOG_EPS``."""
    x = as_tensor(x)
    if np.any(x.data < 0) and is_strict():
        raise DomainError("log of a negative value")
    safe = np.maximum(x.data, LOG_EPS)

    def bw(g):
        return (g / safe * (x.data >= LOG_EPS),)
    return Tensor._node(np.log(safe), (x,), bw, "log")


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)
    return Tensor._node(np.asarray(out, dtype=np.float64), (x,), bw, "sum")


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    count = math.prod(x.shape[a] for a in axes) if axes else 1
    out = x.data.sum(axis=axes, keepdims=keepdims) / count

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape).copy(),)
    return Tensor._node(np.asarray(out, dtype=np.float64), (x,), bw, "mean")


def broadcast(x, shape):
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError(f"cannot broadcast {x.shape} to {shape}") from None

    def bw(g):
        return (_unbroadcast(g, x.shape),)
    return Tensor._node(out, (x,), bw, "broadcast")


def _rows(arr):
    if arr.ndim == 0:
        raise ShapeError("row-wise operation needs at least one dimension")
    return np.ascontiguousarray(arr.reshape(-1, arr.shape[-1]))


def softmax(x):
    x = as_tensor(x)
    p = kernels.softmax_fwd(_rows(x.data))

    def bw(g):
        return (kernels.softmax_bwd(p, _rows(g)).reshape(x.shape),)
    return Tensor._node(p.reshape(x.shape), (x,), bw, "softmax")


def log_softmax(x):
    x = as_tensor(x)
    lp = kernels.log_softmax_fwd(_rows(x.data))

    def bw(g):
        return (kernels.log_softmax_bwd(lp, _rows(g)).reshape(x.shape),)
    return Tensor._node(lp.reshape(x.shape), (x,), bw, "log_softmax")


def l2_normalize(x):
    """Row-wise ``x / sqrt(sum(x**2) + NORM_EPS)``; zero rows stay zero."""
    x = as_tensor(x)
    y, norms = kernels.l2norm_fwd(_rows(x.data), NORM_EPS)

    def bw(g):
        return (kernels.l2norm_bwd(y, norms, _rows(g)).reshape(x.shape),)
    return Tensor._node(y.reshape(x.shape), (x,), bw, "l2_normalize")


def batchnorm(x, gamma, beta, running_mean=None, running_var=None, training=True,
              momentum=0.1, eps=1e-5):
    """Per-feature batch normalization of a ``(batch, features)`` tensor.

    In training mode the batch statistics are used and, when given, the
    running statistics are updated in place with the unbiased batch variance.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batchnorm: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    if training:
        xd = np.ascontiguousarray(x.data)
        out, xhat, bmean, bvar = kernels.batchnorm_fwd(xd, gamma.data, beta.data, eps)
        n = x.shape[0]
        if running_mean is not None:
            unbiased = bvar * n / (n - 1) if n > 1 else bvar
            running_mean *= 1.0 - momentum
            running_mean += momentum * bmean
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased

        def bw(g):
            return kernels.batchnorm_bwd(np.ascontiguousarray(g), xhat, bvar, gamma.data, eps)
    else:
        if running_mean is None:
            raise ContractError("batchnorm in eval mode needs running statistics")
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean) * inv_std
        out = xhat * gamma.data + beta.data

        def bw(g):
            return g * gamma.data * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)
    return Tensor._node(out, (x, gamma, beta), bw, "batchnorm")


def entropy_rows(logits):
    """Shannon entropy (nats) of ``softmax(logits)`` for every row."""
    p = softmax(logits)
    return -tsum(p * log(p), axis=-1)


def shannon_entropy(p):
    """Entropy of a probability vector with the ``0 log 0 = 0`` convention."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    if np.any(p > 1) or abs(p.sum() - 1.0) > 1e-6:
        raise DomainError(f"probabilities must sum to 1, got {p.sum()!r}")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


OPS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "matmul": matmul,
    "transpose": transpose,
    "relu": relu,
    "exp": exp,
    "log": log,
    "sum": tsum,
    "mean": mean,
    "broadcast": broadcast,
    "l2_normalize": l2_normalize,
    "batchnorm": batchnorm,
    "softmax": softmax,
    "log_softmax": log_softmax,
}


def forward_op(name, *inputs, **kwargs):
    """Apply the registered operation ``name`` to ``inputs``."""
    try:
        fn = OPS[name]
    except KeyError:
        raise ContractError(f"unknown op {name!r}") from None
    return fn(*inputs, **kwargs)


def topological_order(root):
    """Nodes reachable from ``root`` with every parent before its children."""
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
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Back-propagate from a scalar ``loss``.

    Gradients are accumulated into ``.grad`` of every leaf that requires
    them; the returned dict maps those leaves to their gradient arrays.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    order = topological_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.requires_grad:
                _check_finite(g, f"gradient of {node.name or 'leaf'}")
                node.grad = g.copy() if node.grad is None else node.grad + g
                leaves[node] = node.grad
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = pg if prev is None else prev + pg
    for node in order:
        if node._backward is not None:
            node._parents = ()
            node._backward = None
    return leaves
