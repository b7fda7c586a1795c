"""Dense N-D tensor with tape-based reverse-mode automatic differentiation.

Every operation the model needs is implemented here or in the sibling
``conv``/``interpolate`` modules. Forward passes record nodes onto a global
:class:`Graph` (a tape in execution order, which is automatically a
topological order); :func:`backward` walks the tape once in reverse,
accumulates gradients into ``Tensor.grad``, and clears the tape.

Design notes:

* Buffers are numpy arrays in the engine-wide dtype (float32 by default,
  float64 for gradient-check suites; see ``dtype`` module).
* ``add``/``mul``/``sub``/``div`` support numpy broadcasting; their backward
  sums gradients over broadcast axes. No other op broadcasts.
* Reductions and gradient accumulation run in a fixed order so that two runs
  with the same seed produce bit-identical results.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import NumericError, ShapeError, UsageError
from .dtype import debug_checks_enabled, get_default_dtype


class Tensor:
    """Dense row-major tensor; the value holder for activations and weights."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or get_default_dtype())
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """The underlying buffer (not a copy); treat as read-only."""
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # operator sugar; scalars are python floats, tensors must match per-op rules
    def __add__(self, other):
        return add(self, _wrap(other, self))

    def __radd__(self, other):
        return add(_wrap(other, self), self)

    def __sub__(self, other):
        return sub(self, _wrap(other, self))

    def __rsub__(self, other):
        return sub(_wrap(other, self), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self))

    def __rmul__(self, other):
        return mul(_wrap(other, self), self)

    def __truediv__(self, other):
        return div(self, _wrap(other, self))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def permute(self, *axes):
        return permute(self, axes[0] if len(axes) == 1 and isinstance(axes[0], (tuple, list)) else axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """A trainable leaf tensor; models assign hierarchical names on traversal."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name


def _wrap(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


class _Node:
    """One recorded operation: output, inputs, and the gradient closure."""

    __slots__ = ("output", "inputs", "backward_fn", "op")

    def __init__(self, op: str, output: Tensor, inputs: tuple, backward_fn):
        self.op = op
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


class Graph:
    """Tape of recorded nodes, in execution (hence topological) order."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.recording = True

    def clear(self):
        self.nodes.clear()


_GRAPH = Graph()


def active_graph() -> Graph:
    return _GRAPH


def is_recording() -> bool:
    return _GRAPH.recording


@contextmanager
def no_grad():
    """Disable graph recording (pure forward evaluation)."""
    previous = _GRAPH.recording
    _GRAPH.recording = False
    try:
        yield
    finally:
        _GRAPH.recording = previous


def _check_finite(op: str, out: np.ndarray) -> None:
    if debug_checks_enabled() and not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite values produced by op '{op}'")


def _make(op: str, out_data: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    """Create the output tensor and record the node if grads are needed."""
    _check_finite(op, out_data)
    out = Tensor(out_data, dtype=out_data.dtype)
    if _GRAPH.recording and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _GRAPH.nodes.append(_Node(op, out, inputs, backward_fn))
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if grad is None or not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = grad
    else:
        tensor.grad = tensor.grad + grad


def backward(loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(tensor) into ``grad`` of reachable tensors.

    ``loss`` must be scalar. The tape is cleared afterwards; parameters not
    reachable from the loss keep whatever gradient they had (zeros after
    ``zero_grad``).
    """
    if loss.data.size != 1 or loss.data.ndim != 0:
        raise UsageError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise UsageError("backward on a tensor that does not require grad (graph not recorded?)")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_GRAPH.nodes):
        g = node.output.grad
        if g is None:
            continue
        grads = node.backward_fn(g)
        for tensor, grad in zip(node.inputs, grads):
            _accumulate(tensor, grad)
    _GRAPH.clear()


# ---------------------------------------------------------------------------
# broadcasting helpers

def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` over axes that were broadcast to reach ``grad.shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcastable(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are not compatible") from None


# ---------------------------------------------------------------------------
# elementwise ops

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcastable("add", a, b)
    out = a.data + b.data

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make("add", out, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcastable("sub", a, b)
    out = a.data - b.data

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make("sub", out, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcastable("mul", a, b)
    out = a.data * b.data
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return _unbroadcast(g * b_data, a.shape), _unbroadcast(g * a_data, b.shape)

    return _make("mul", out, (a, b), backward_fn)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcastable("div", a, b)
    out = a.data / b.data
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        ga = _unbroadcast(g / b_data, a.shape)
        gb = _unbroadcast(-g * a_data / (b_data * b_data), b.shape)
        return ga, gb

    return _make("div", out, (a, b), backward_fn)


def neg(a: Tensor) -> Tensor:
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def mul_scalar(a: Tensor, s: float) -> Tensor:
    s = a.data.dtype.type(s)
    return _make("mul_scalar", a.data * s, (a,), lambda g: (g * s,))


def add_scalar(a: Tensor, s: float) -> Tensor:
    s = a.data.dtype.type(s)
    return _make("add_scalar", a.data + s, (a,), lambda g: (g,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make("relu", np.where(mask, a.data, a.data.dtype.type(0)), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    # split by sign for overflow-free evaluation
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward_fn(g):
        return (g * out * (1.0 - out),)

    return _make("sigmoid", out, (a,), backward_fn)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    x = a.data
    out = np.log(x)
    return _make("log", out, (a,), lambda g: (g / x,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def backward_fn(g):
        return (g * (0.5 / out),)

    return _make("sqrt", out, (a,), backward_fn)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through the interior, zero outside."""
    x = a.data
    out = np.clip(x, lo, hi)
    mask = (x >= lo) & (x <= hi)
    return _make("clip", out, (a,), lambda g: (g * mask,))


def min_elementwise(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; on ties the gradient goes to the first argument."""
    if a.shape != b.shape:
        raise ShapeError(f"min_elementwise: shapes {a.shape} and {b.shape} differ")
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)

    def backward_fn(g):
        return g * take_a, g * ~take_a

    return _make("min_elementwise", out, (a, b), backward_fn)


# ---------------------------------------------------------------------------
# matmul / softmax

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product on the last two axes.

    2-D operands give the standard ``(m,k) @ (k,n)``; higher-rank operands
    must share identical leading (batch) axes — no broadcasting.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    out = a.data @ b.data
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        ga = g @ b_data.swapaxes(-1, -2)
        gb = a_data.swapaxes(-1, -2) @ g
        return ga, gb

    return _make("matmul", out, (a, b), backward_fn)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``; rows sum to one."""
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _make("softmax", out, (a,), backward_fn)


# ---------------------------------------------------------------------------
# shape ops

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.size and -1 not in shape:
        raise ShapeError(f"reshape: cannot view {a.shape} ({a.size} elements) as {shape}")
    in_shape = a.shape
    out = a.data.reshape(shape)
    return _make("reshape", out, (a,), lambda g: (g.reshape(in_shape),))


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(int(x) for x in axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"permute: axes {axes} are not a permutation of rank {a.ndim}")
    inverse = np.argsort(axes)
    out = a.data.transpose(axes)
    return _make("permute", out, (a,), lambda g: (g.transpose(inverse),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise UsageError("concat of an empty sequence")
    axis = axis % tensors[0].ndim
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {tensors[0].shape} on axis {axis}")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(sizes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return _make("concat", out, tuple(tensors), backward_fn)


# ---------------------------------------------------------------------------
# reductions

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)
    in_shape = a.shape

    def backward_fn(g):
        if not keepdims:
            expand = list(in_shape)
            for ax in axes:
                expand[ax] = 1
            g = g.reshape(expand)
        return (np.broadcast_to(g, in_shape),)

    return _make("reduce_sum", out, (a,), backward_fn)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes], dtype=np.int64))
    out = a.data.mean(axis=axes, keepdims=keepdims)
    in_shape = a.shape

    def backward_fn(g):
        if not keepdims:
            expand = list(in_shape)
            for ax in axes:
                expand[ax] = 1
            g = g.reshape(expand)
        return (np.broadcast_to(g / count, in_shape).astype(g.dtype, copy=False),)

    return _make("reduce_mean", out, (a,), backward_fn)
