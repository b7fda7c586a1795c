"""Module system and the layers the architecture is assembled from.

Weight initialization follows a uniform fan-in rule,
``U(-sqrt(1/fan_in), +sqrt(1/fan_in))`` for convolution/projection weights
with zero biases; normalization layers start at identity (gamma=1, beta=0).
All random draws go through an explicit ``numpy.random.Generator`` so model
construction is a pure function of the seed.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ShapeError
from .conv import conv2d, conv3d
from .dtype import get_default_dtype
from .tensor import (
    Parameter,
    Tensor,
    add,
    div,
    is_recording,
    matmul,
    mul,
    reduce_mean,
    relu,
    reshape,
    sqrt,
)


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())


class Module:
    """Base class with hierarchical parameter/buffer traversal.

    Submodules and parameters are discovered from instance attributes in
    definition order (lists and tuples of modules are walked too), which
    keeps parameter naming and init order deterministic.
    """

    def __init__(self):
        self._buffers: dict[str, Tensor] = {}
        self.training = True

    def register_buffer(self, name: str, tensor: Tensor) -> None:
        tensor.requires_grad = False
        self._buffers[name] = tensor

    def __getattr__(self, name):
        buffers = self.__dict__.get("_buffers")
        if buffers is not None and name in buffers:
            return buffers[name]
        raise AttributeError(f"{type(self).__name__} has no attribute {name!r}")

    def _children(self):
        def walk(name, value):
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    yield from walk(f"{name}.{i}", item)

        for attr, value in self.__dict__.items():
            yield from walk(attr, value)

    def named_parameters(self, prefix: str = ""):
        for attr, value in self.__dict__.items():
            if isinstance(value, Parameter):
                yield (prefix + attr, value)
        for attr, child in self._children():
            yield from child.named_parameters(prefix + attr + ".")

    def parameters(self):
        seen = []
        for name, p in self.named_parameters():
            p.name = name
            seen.append(p)
        return seen

    def named_buffers(self, prefix: str = ""):
        for name, buf in self._buffers.items():
            yield (prefix + name, buf)
        for attr, child in self._children():
            yield from child.named_buffers(prefix + attr + ".")

    def named_state(self):
        """Parameters followed by buffers; the checkpointable state."""
        yield from self.named_parameters()
        yield from self.named_buffers()

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name, t in self.named_state():
            if name in out:
                raise ShapeError(f"duplicate state name {name!r}")
            out[name] = t.data
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        from ..errors import CheckpointError

        state = dict(self.named_state())
        missing = sorted(set(state) - set(arrays))
        unexpected = sorted(set(arrays) - set(state))
        if missing or unexpected:
            raise CheckpointError(f"state mismatch: missing={missing}, unexpected={unexpected}")
        for name, tensor in state.items():
            arr = arrays[name]
            if tuple(arr.shape) != tensor.shape:
                raise CheckpointError(f"shape mismatch for {name!r}: checkpoint {arr.shape} vs model {tensor.shape}")
            tensor.data = arr.astype(tensor.data.dtype, copy=True)

    def train(self, mode: bool = True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """Affine map on the trailing axis: ``y = x @ W + b`` with W of (in, out)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(uniform_fan_in(rng, (in_features, out_features), in_features))
        self.bias = Parameter(np.zeros(out_features, dtype=get_default_dtype())) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        flat = reshape(x, (-1, self.in_features)) if x.ndim != 2 else x
        out = matmul(flat, self.weight)
        if self.bias is not None:
            out = add(out, self.bias)
        if x.ndim != 2:
            out = reshape(out, lead + (self.out_features,))
        return out


class Conv3d(Module):
    def __init__(self, in_channels, out_channels, kernel, stride=(1, 1, 1), padding=(0, 0, 0),
                 rng: np.random.Generator = None, bias: bool = True):
        super().__init__()
        kt, kh, kw = kernel
        self.stride = tuple(stride)
        self.padding = tuple(padding)
        fan_in = kt * kh * kw * in_channels
        self.weight = Parameter(uniform_fan_in(rng, (kt, kh, kw, in_channels, out_channels), fan_in))
        self.bias = Parameter(np.zeros(out_channels, dtype=get_default_dtype())) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = conv3d(x, self.weight, self.stride, self.padding)
        if self.bias is not None:
            out = add(out, self.bias)
        return out


class Conv2d(Module):
    """Frame-wise 2-D convolution; a leading axis on the input is a batch."""

    def __init__(self, in_channels, out_channels, kernel, stride=(1, 1), padding=(0, 0),
                 rng: np.random.Generator = None, bias: bool = True):
        super().__init__()
        kh, kw = kernel
        self.stride = tuple(stride)
        self.padding = tuple(padding)
        fan_in = kh * kw * in_channels
        self.weight = Parameter(uniform_fan_in(rng, (kh, kw, in_channels, out_channels), fan_in))
        self.bias = Parameter(np.zeros(out_channels, dtype=get_default_dtype())) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = conv2d(x, self.weight, self.stride, self.padding)
        if self.bias is not None:
            out = add(out, self.bias)
        return out


def _normalize(x: Tensor, axes, eps: float) -> Tensor:
    mean = reduce_mean(x, axis=axes, keepdims=True)
    centered = x - mean
    var = reduce_mean(mul(centered, centered), axis=axes, keepdims=True)
    return div(centered, sqrt(add(var, Tensor(np.asarray(eps, dtype=x.data.dtype)))))


class BatchNorm(Module):
    """Batch normalization over all axes but the trailing channel axis.

    Train mode uses batch statistics and updates running estimates with the
    given momentum; eval mode uses the running estimates. Running stats are
    only updated while the graph is recording, so pure evaluations (e.g.
    finite-difference probes under ``no_grad``) never mutate state.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        dt = get_default_dtype()
        self.gamma = Parameter(np.ones(channels, dtype=dt))
        self.beta = Parameter(np.zeros(channels, dtype=dt))
        self.register_buffer("running_mean", Tensor(np.zeros(channels, dtype=dt)))
        self.register_buffer("running_var", Tensor(np.ones(channels, dtype=dt)))
        self.register_buffer("num_updates", Tensor(np.zeros((), dtype=dt)))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.channels:
            raise ShapeError(f"batch norm expects {self.channels} channels, got input {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if self.training:
            xhat = _normalize(x, axes, self.eps)
            if is_recording():
                batch_mean = x.data.mean(axis=axes)
                batch_var = x.data.var(axis=axes)
                m = self.momentum
                self.running_mean.data = (1 - m) * self.running_mean.data + m * batch_mean
                self.running_var.data = (1 - m) * self.running_var.data + m * batch_var
                self.num_updates.data = self.num_updates.data + 1
        else:
            if float(self.num_updates.data) == 0.0:
                warnings.warn("batch norm evaluated before any training step; using (0,1) statistics")
            centered = x - self.running_mean
            denom = np.sqrt(self.running_var.data + self.eps)
            xhat = div(centered, Tensor(denom, dtype=denom.dtype))
        return add(mul(xhat, self.gamma), self.beta)


class LayerNorm(Module):
    """Per-token normalization over the trailing channel axis."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.eps = eps
        dt = get_default_dtype()
        self.gamma = Parameter(np.ones(channels, dtype=dt))
        self.beta = Parameter(np.zeros(channels, dtype=dt))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.channels:
            raise ShapeError(f"layer norm expects {self.channels} channels, got input {x.shape}")
        xhat = _normalize(x, (x.ndim - 1,), self.eps)
        return add(mul(xhat, self.gamma), self.beta)


class FrameNorm(Module):
    """Per-frame, per-channel normalization over the spatial axes of (T,h,w,C).

    Used inside the frame-wise encoder instead of batch statistics so that a
    frame's features never depend on the other frames of the clip.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.eps = eps
        dt = get_default_dtype()
        self.gamma = Parameter(np.ones(channels, dtype=dt))
        self.beta = Parameter(np.zeros(channels, dtype=dt))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[-1] != self.channels:
            raise ShapeError(f"frame norm expects (T,h,w,{self.channels}), got {x.shape}")
        xhat = _normalize(x, (1, 2), self.eps)
        return add(mul(xhat, self.gamma), self.beta)


class ConvBNReLU3d(Module):
    """Conv3d + BatchNorm + ReLU, the workhorse block of the transformer side.

    The conv carries no bias: the norm's mean subtraction would cancel it.
    """

    def __init__(self, in_channels, out_channels, kernel=(3, 3, 3), stride=(1, 1, 1),
                 padding=(1, 1, 1), rng=None):
        super().__init__()
        self.conv = Conv3d(in_channels, out_channels, kernel, stride, padding, rng=rng, bias=False)
        self.norm = BatchNorm(out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return relu(self.norm(self.conv(x)))


class ConvBNReLU2d(Module):
    """Frame-wise Conv2d + BatchNorm + ReLU (conv bias omitted, see above)."""

    def __init__(self, in_channels, out_channels, kernel=(3, 3), stride=(1, 1),
                 padding=(1, 1), rng=None):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, kernel, stride, padding, rng=rng, bias=False)
        self.norm = BatchNorm(out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return relu(self.norm(self.conv(x)))
