"""Frame-wise visual encoder producing a four-level feature pyramid.

A small strided-convolution pyramid stands in for a pretrained backbone:
a two-block stem brings the input to 1/4 resolution (level 1), then three
stride-2 stages emit levels 2..4 at 1/8, 1/16 and 1/32. All operations are
2-D and applied per frame with shared weights; normalization uses per-frame
statistics (``FrameNorm``) so no information ever crosses the temporal axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Tensor, relu
from .engine.nn import Conv2d, FrameNorm, Module
from .errors import ConfigError, DataError


@dataclass
class VideoClip:
    """An RGB clip: frames of shape (T, H, W, 3) with values in [0, 1]."""

    frames: Tensor
    frame_rate: float | None = None

    def validate(self) -> "VideoClip":
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ConfigError(f"clip frames must be (T,H,W,3), got {self.frames.shape}")
        t, h, w, _ = self.frames.shape
        if t < 1:
            raise ConfigError("clip length T must be >= 1")
        if h % 32 != 0 or w % 32 != 0:
            raise ConfigError(f"clip spatial size ({h},{w}) must be divisible by 32")
        data = self.frames.data
        if data.min() < 0.0 or data.max() > 1.0:
            raise DataError(f"clip values outside [0,1]: range [{data.min()}, {data.max()}]")
        return self

    @property
    def shape(self):
        return self.frames.shape


@dataclass
class FeaturePyramid:
    """Four feature volumes at (H,W)/4, /8, /16, /32 with channels c1<=c2<=c3<=c4."""

    levels: list  # four Tensors (T, h_i, w_i, C_i), i = 1..4
    channels: tuple

    def __post_init__(self):
        if len(self.levels) != 4:
            raise ConfigError(f"pyramid needs 4 levels, got {len(self.levels)}")

    def level_shapes(self):
        return [lvl.shape for lvl in self.levels]


def pyramid_level_size(height: int, width: int, level: int) -> tuple:
    """Spatial size of pyramid level i (1-based): (H, W) / 2**(i+1)."""
    return height // (2 ** (level + 1)), width // (2 ** (level + 1))


@dataclass
class EncoderConfig:
    channels: tuple = (8, 16, 32, 64)

    def validate(self) -> "EncoderConfig":
        c = tuple(self.channels)
        if len(c) != 4:
            raise ConfigError(f"channel plan needs 4 entries, got {c}")
        if any(a > b for a, b in zip(c, c[1:])):
            raise ConfigError(f"channel plan must be non-decreasing, got {c}")
        return self


class _StemBlock(Module):
    """Stride-2 Conv + per-frame norm + ReLU (no conv bias; the norm's mean
    subtraction would cancel it)."""

    def __init__(self, cin, cout, rng):
        super().__init__()
        self.conv = Conv2d(cin, cout, (3, 3), stride=(2, 2), padding=(1, 1), rng=rng, bias=False)
        self.norm = FrameNorm(cout)

    def forward(self, x):
        return relu(self.norm(self.conv(x)))


class PyramidEncoder(Module):
    """Toy hierarchical encoder honoring the four-level pyramid contract."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        super().__init__()
        config.validate()
        c1, c2, c3, c4 = config.channels
        self.channels = tuple(config.channels)
        self.stem1 = _StemBlock(3, c1, rng)
        self.stem2 = _StemBlock(c1, c1, rng)
        self.stage2 = _StemBlock(c1, c2, rng)
        self.stage3 = _StemBlock(c2, c3, rng)
        self.stage4 = _StemBlock(c3, c4, rng)

    def forward(self, clip: VideoClip) -> FeaturePyramid:
        clip.validate()
        f1 = self.stem2(self.stem1(clip.frames))
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        f4 = self.stage4(f3)
        return FeaturePyramid(levels=[f1, f2, f3, f4], channels=self.channels)

    encode = forward
