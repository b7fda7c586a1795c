"""Task-specific heads on the aggregated feature volume (T, h1, w1, C1).

The VSP head collapses time with a full-span temporal convolution and emits
one sigmoid saliency map; the VSOD head keeps all T frames and emits one
sigmoid mask per frame. Both upsample bilinearly to the requested output
resolution.
"""

from __future__ import annotations

import warnings

import numpy as np

from .engine import Tensor, interpolate_bilinear, relu, reshape, sigmoid
from .engine.nn import BatchNorm, Conv2d, Conv3d, Module
from .errors import ShapeError


class VSPDecoder(Module):
    """Temporal collapse (Conv3d kernel T x 3 x 3, no temporal padding) +
    BN + ReLU, then a 1x1x1 Conv-Sigmoid to one channel, upsampled to the
    target size. Output: (H_out, W_out) in (0, 1)."""

    def __init__(self, channels: int, clip_len: int, rng: np.random.Generator):
        super().__init__()
        self.clip_len = clip_len
        self.temporal = Conv3d(channels, channels, (clip_len, 3, 3), padding=(0, 1, 1), rng=rng, bias=False)
        self.norm = BatchNorm(channels)
        self.project = Conv3d(channels, 1, (1, 1, 1), rng=rng)

    def forward(self, fx: Tensor, out_size: tuple) -> Tensor:
        if fx.ndim != 4 or fx.shape[0] != self.clip_len:
            raise ShapeError(f"decoder built for T={self.clip_len}, got feature {fx.shape}")
        _warn_if_downsampling(fx, out_size)
        x = relu(self.norm(self.temporal(fx)))  # (1, h1, w1, C)
        x = sigmoid(self.project(x))  # (1, h1, w1, 1)
        x = interpolate_bilinear(x, out_size)
        return reshape(x, tuple(out_size))


class VSODDecoder(Module):
    """Per-frame Conv(3x3)-Sigmoid to one channel, upsampled per frame.
    Output: (T, H_out, W_out) in (0, 1)."""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.project = Conv2d(channels, 1, (3, 3), padding=(1, 1), rng=rng)

    def forward(self, fx: Tensor, out_size: tuple) -> Tensor:
        if fx.ndim != 4:
            raise ShapeError(f"decoder expects (T,h1,w1,C), got {fx.shape}")
        _warn_if_downsampling(fx, out_size)
        x = sigmoid(self.project(fx))  # (T, h1, w1, 1)
        x = interpolate_bilinear(x, out_size)
        return reshape(x, (fx.shape[0],) + tuple(out_size))


def _warn_if_downsampling(fx: Tensor, out_size: tuple) -> None:
    if out_size[0] < fx.shape[1] or out_size[1] < fx.shape[2]:
        warnings.warn(
            f"decoder output size {tuple(out_size)} is smaller than the feature grid "
            f"{fx.shape[1:3]}; prediction will be downsampled"
        )
