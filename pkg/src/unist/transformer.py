"""Saliency-aware transformer: four stages over the feature pyramid.

Stage 1 runs a semantic-guided block on the coarsest level and then pooled
sal-attention; stages 2..4 upsample the previous stage's tokens (up
embedding with a pyramid skip) and attend at progressively finer
resolutions. Each stage's pre-softmax attention scores are handed to the
next stage (saliency transfer): reshaped over the query grid, bilinearly
doubled, and added to the finer stage's scores through an
identity-initialized head-mixing matrix before the softmax.

Key/value embeddings are pooled by a strided convolution whose spatial
kernel/stride halves the coarsest grid (2, 4, 8, 16 for the stages on
levels 4..1), so every stage shares one key layout ``(T, h4//2, w4//2)``
and the score matrices are addable across scales. The pooling stride is 1
on the temporal axis, keeping all T frames in the keys.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import FeaturePyramid
from .engine import (
    Parameter,
    Tensor,
    add,
    concat,
    interpolate_bilinear,
    interpolate_bilinear2x,
    matmul,
    mul_scalar,
    permute,
    reshape,
    softmax,
)
from .engine.dtype import get_default_dtype
from .engine.nn import Conv3d, ConvBNReLU2d, ConvBNReLU3d, LayerNorm, Linear, Module
from .errors import ConfigError, FormatError, ShapeError


@dataclass
class TokenSequence:
    """A flattened (T*h*w, C) token matrix carrying its 3-D layout."""

    tokens: Tensor
    layout: tuple  # (T, h, w, C)

    def __post_init__(self):
        t, h, w, c = self.layout
        if self.tokens.shape != (t * h * w, c):
            raise ShapeError(f"token matrix {self.tokens.shape} does not match layout {self.layout}")

    def to_volume(self) -> Tensor:
        return reshape(self.tokens, self.layout)

    @classmethod
    def from_volume(cls, volume: Tensor) -> "TokenSequence":
        t, h, w, c = volume.shape
        return cls(reshape(volume, (t * h * w, c)), (t, h, w, c))


@dataclass
class AttentionScore:
    """Per-head pre-softmax scores of shape (heads, T*h*w, T*kh*kw)."""

    scores: Tensor
    query_layout: tuple  # (T, h, w)
    key_layout: tuple  # (T, kh, kw), shared across stages

    def __post_init__(self):
        heads = self.scores.shape[0]
        nq = int(np.prod(self.query_layout))
        nk = int(np.prod(self.key_layout))
        if self.scores.shape != (heads, nq, nk):
            raise ShapeError(
                f"score matrix {self.scores.shape} does not match layouts "
                f"{self.query_layout} x {self.key_layout}"
            )

    @property
    def heads(self) -> int:
        return self.scores.shape[0]


@dataclass
class StageConfig:
    """Per-stage attention geometry.

    The stage operating on pyramid level i pools keys/values with spatial
    kernel = stride = 2**(5-i); queries keep the full grid (3x3x3 kernel,
    stride 1, padding 1).
    """

    channels: int
    kv_pool: int  # spatial kernel and stride of the K/V pooling conv
    heads: int = 2
    q_kernel: tuple = (3, 3, 3)
    q_stride: tuple = (1, 1, 1)
    q_pad: tuple = (1, 1, 1)

    def validate(self) -> "StageConfig":
        if self.kv_pool not in (2, 4, 8, 16):
            raise ConfigError(f"kv pooling stride must be one of 2/4/8/16, got {self.kv_pool}")
        if self.channels % self.heads != 0:
            raise ConfigError(f"channels {self.channels} not divisible by heads {self.heads}")
        return self


def kv_pool_for_level(level: int) -> int:
    """Spatial pooling stride for the stage on pyramid level i: 2**(5-i)."""
    return 2 ** (5 - level)


def saliency_transfer(prev: AttentionScore, target_query_layout: tuple) -> Tensor:
    """Upsample a coarser stage's scores onto a 2x finer query grid.

    The score matrix is viewed as a (T, h, w, heads*Nk) volume over the
    query grid, bilinearly doubled in the two spatial axes, and flattened
    back to (heads, T*2h*2w, Nk).
    """
    t, hq, wq = target_query_layout
    tp, hp, wp = prev.query_layout
    if tp != t or hq != 2 * hp or wq != 2 * wp:
        raise ShapeError(
            f"saliency transfer needs a 2x spatial ratio: prev query {prev.query_layout} "
            f"vs target {target_query_layout}"
        )
    heads = prev.heads
    nk = prev.scores.shape[2]
    s = reshape(prev.scores, (heads, t, hp, wp, nk))
    s = permute(s, (1, 2, 3, 0, 4))
    s = reshape(s, (t, hp, wp, heads * nk))
    s = interpolate_bilinear2x(s)
    s = reshape(s, (t, hq, wq, heads, nk))
    s = permute(s, (3, 0, 1, 2, 4))
    return reshape(s, (heads, t * hq * wq, nk))


class SemanticGuidedBlock(Module):
    """Stage-1 entry block on the coarsest level.

    Computes a semantic feature (Conv3d-BN-ReLU), projects it to a
    1-channel saliency map, concatenates the two on channels, and restores
    the channel count with a second Conv3d-BN-ReLU.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.semantic = ConvBNReLU3d(channels, channels, rng=rng)
        self.project = Linear(channels, 1, rng=rng)
        self.combine = ConvBNReLU3d(channels + 1, channels, rng=rng)

    def forward(self, f4: Tensor) -> TokenSequence:
        semantic = self.semantic(f4)
        saliency = self.project(semantic)  # (T, h4, w4, 1)
        combined = self.combine(concat([saliency, semantic], axis=-1))
        return TokenSequence.from_volume(combined)


class UpEmbedding(Module):
    """Token upsampling between stages: 2x bilinear, channel-reducing
    Conv-BN-ReLU (2-D, per frame), then addition of the pyramid skip."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = ConvBNReLU2d(in_channels, out_channels, rng=rng)

    def forward(self, tokens: TokenSequence, skip: Tensor) -> TokenSequence:
        t, h, w, c = tokens.layout
        if skip.ndim != 4 or skip.shape[0] != t or skip.shape[1] != 2 * h or skip.shape[2] != 2 * w:
            raise ShapeError(f"up embedding skip {skip.shape} incompatible with tokens layout {tokens.layout}")
        up = self.conv(interpolate_bilinear2x(tokens.to_volume()))
        if up.shape != skip.shape:
            raise ShapeError(f"up embedding produced {up.shape}, skip is {skip.shape}")
        return TokenSequence.from_volume(add(up, skip))


class SalAttention(Module):
    """Pooled spatio-temporal attention with cross-scale score fusion.

    Q/K/V embeddings are Conv3d + LayerNorm followed by per-head linear
    projections; scores are scaled by 1/sqrt(C). When an incoming coarser
    score is given it is upsampled onto the query grid, added, and mixed
    across heads by an identity-initialized (heads x heads) matrix; the
    post-fusion pre-softmax scores are returned for the next stage.
    """

    def __init__(self, cfg: StageConfig, rng: np.random.Generator):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        c, pool = cfg.channels, cfg.kv_pool
        self.conv_q = Conv3d(c, c, cfg.q_kernel, cfg.q_stride, cfg.q_pad, rng=rng)
        self.ln_q = LayerNorm(c)
        self.conv_k = Conv3d(c, c, (1, pool, pool), (1, pool, pool), (0, 0, 0), rng=rng)
        self.ln_k = LayerNorm(c)
        self.conv_v = Conv3d(c, c, (1, pool, pool), (1, pool, pool), (0, 0, 0), rng=rng)
        self.ln_v = LayerNorm(c)
        self.w_q = Linear(c, c, rng=rng)
        self.w_k = Linear(c, c, rng=rng)
        self.w_v = Linear(c, c, rng=rng)
        self.head_mix = Parameter(np.eye(cfg.heads, dtype=get_default_dtype()))

    def _split_heads(self, x: Tensor, n: int) -> Tensor:
        heads = self.cfg.heads
        return permute(reshape(x, (n, heads, self.cfg.channels // heads)), (1, 0, 2))

    def forward(self, tokens: TokenSequence, incoming: "AttentionScore | None" = None):
        t, h, w, c = tokens.layout
        if c != self.cfg.channels:
            raise ShapeError(f"stage expects {self.cfg.channels} channels, got layout {tokens.layout}")
        heads = self.cfg.heads
        volume = tokens.to_volume()

        q = self.w_q(self.ln_q(self.conv_q(volume)))  # (T, h, w, C)
        k_vol = self.conv_k(volume)  # (T, kh, kw, C)
        key_layout = k_vol.shape[:3]
        k = self.w_k(self.ln_k(k_vol))
        v = self.w_v(self.ln_v(self.conv_v(volume)))

        nq = t * h * w
        nk = int(np.prod(key_layout))
        qh = self._split_heads(reshape(q, (nq, c)), nq)
        kh = self._split_heads(reshape(k, (nk, c)), nk)
        vh = self._split_heads(reshape(v, (nk, c)), nk)

        scores = mul_scalar(matmul(qh, permute(kh, (0, 2, 1))), 1.0 / float(np.sqrt(c)))

        if incoming is not None:
            if tuple(incoming.key_layout) != tuple(key_layout):
                raise ShapeError(
                    f"incoming scores have key layout {incoming.key_layout}, this stage pools to "
                    f"{tuple(key_layout)}; stride plan is inconsistent"
                )
            if tuple(incoming.query_layout) == (t, h, w):
                transfer = incoming.scores  # same grid (block chaining inside a stage)
            else:
                transfer = saliency_transfer(incoming, (t, h, w))
            fused = add(scores, transfer)
            mixed = matmul(self.head_mix, reshape(fused, (heads, nq * nk)))
            scores = reshape(mixed, (heads, nq, nk))

        attended = matmul(softmax(scores, axis=-1), vh)  # (heads, nq, C/heads)
        merged = reshape(permute(attended, (1, 0, 2)), (nq, c))
        out_tokens = add(merged, tokens.tokens)
        return (
            TokenSequence(out_tokens, tokens.layout),
            AttentionScore(scores, (t, h, w), tuple(key_layout)),
        )


class MultiScaleAggregate(Module):
    """Fuse stage outputs: per level a 1x1x1 channel-adjust conv and bilinear
    upsampling to the finest grid, then channel concat and a reducing conv."""

    def __init__(self, level_channels, out_channels: int, rng: np.random.Generator, final_kernel: int = 3):
        super().__init__()
        self.out_channels = out_channels
        self.adjust = [
            Conv3d(c, out_channels, (1, 1, 1), rng=rng) for c in level_channels
        ]
        pad = (final_kernel - 1) // 2
        self.reduce = Conv3d(
            out_channels * len(level_channels),
            out_channels,
            (final_kernel, final_kernel, final_kernel),
            padding=(pad, pad, pad),
            rng=rng,
        )

    def forward(self, volumes, target_hw: tuple) -> Tensor:
        aligned = []
        for conv, vol in zip(self.adjust, volumes):
            x = conv(vol)
            if x.shape[1:3] != tuple(target_hw):
                x = interpolate_bilinear(x, target_hw)
            aligned.append(x)
        return self.reduce(concat(aligned, axis=-1))


class SaliencyTransformer(Module):
    """The full four-stage pipeline plus multi-scale aggregation.

    ``num_stages`` < 4 stops after the corresponding level (coarse to fine);
    ``blocks_per_stage`` chains extra attention blocks within a stage, each
    consuming the previous block's scores directly (same grid, no resize).
    The ablation switches mirror the model variants: ``use_semantic_guided``
    replaces the stage-1 entry with a plain Conv3d-BN-ReLU when off, and
    ``use_saliency_transfer`` drops the cross-stage score fusion when off.
    """

    def __init__(
        self,
        channels: tuple,
        rng: np.random.Generator,
        heads: int = 2,
        num_stages: int = 4,
        blocks_per_stage: int = 1,
        use_semantic_guided: bool = True,
        use_saliency_transfer: bool = True,
        aggregate_kernel: int = 3,
    ):
        super().__init__()
        if not 1 <= num_stages <= 4:
            raise ConfigError(f"num_stages must be in 1..4, got {num_stages}")
        if blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage must be >= 1, got {blocks_per_stage}")
        self.channels = tuple(channels)
        self.heads = heads
        self.num_stages = num_stages
        self.use_semantic_guided = use_semantic_guided
        self.use_saliency_transfer = use_saliency_transfer
        # stage j (0-based) operates on pyramid level 4-j
        self.stage_levels = [4 - j for j in range(num_stages)]

        c4 = self.channels[3]
        if use_semantic_guided:
            self.entry = SemanticGuidedBlock(c4, rng)
        else:
            self.entry = ConvBNReLU3d(c4, c4, rng=rng)

        self.up_blocks = []
        self.attn_blocks = []
        for j, level in enumerate(self.stage_levels):
            c = self.channels[level - 1]
            if j > 0:
                prev_c = self.channels[self.stage_levels[j - 1] - 1]
                self.up_blocks.append(UpEmbedding(prev_c, c, rng))
            cfg = StageConfig(channels=c, kv_pool=kv_pool_for_level(level), heads=heads)
            self.attn_blocks.append(
                [SalAttention(cfg, rng) for _ in range(blocks_per_stage)]
            )

        self.aggregate_block = MultiScaleAggregate(
            [self.channels[level - 1] for level in self.stage_levels],
            self.channels[0],
            rng,
            final_kernel=aggregate_kernel,
        )

    def run_stages(self, pyramid: FeaturePyramid):
        """Run all stages; returns (token sequences, attention scores) per stage."""
        f = pyramid.levels
        outputs: list[TokenSequence] = []
        scores: list[AttentionScore] = []
        carried: AttentionScore | None = None
        key_layout = None
        for j, level in enumerate(self.stage_levels):
            if j == 0:
                entry_out = self.entry(f[3])
                tokens = entry_out if isinstance(entry_out, TokenSequence) else TokenSequence.from_volume(entry_out)
            else:
                tokens = self.up_blocks[j - 1](outputs[-1], f[level - 1])
            for block in self.attn_blocks[j]:
                incoming = carried if self.use_saliency_transfer else None
                tokens, score = block(tokens, incoming)
                carried = score
            if key_layout is None:
                key_layout = carried.key_layout
            elif carried.key_layout != key_layout:
                raise ShapeError(
                    f"stage {j + 1} produced key layout {carried.key_layout}, expected {key_layout}"
                )
            outputs.append(tokens)
            scores.append(carried)
        return outputs, scores

    def forward(self, pyramid: FeaturePyramid) -> Tensor:
        outputs, _ = self.run_stages(pyramid)
        return self.aggregate(outputs, pyramid)

    def aggregate(self, outputs, pyramid: FeaturePyramid) -> Tensor:
        target_hw = pyramid.levels[0].shape[1:3]
        return self.aggregate_block([seq.to_volume() for seq in outputs], target_hw)


# ---------------------------------------------------------------------------
# attention-score dumps (one flat binary grid per head, small text header)

_SCORE_MAGIC = "USAT"


def save_attention_score(path, score: AttentionScore, head: int) -> None:
    """Write one head's score grid: a single ASCII header line, then raw
    row-major little-endian float32 of shape (T*h*w, T*kh*kw)."""
    t, h, w = score.query_layout
    kt, kh, kw = score.key_layout
    data = score.scores.data[head]
    header = f"{_SCORE_MAGIC} {t} {h} {w} {kt} {kh} {kw} {head}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_attention_score(path):
    """Read a score dump; returns (array, query_layout, key_layout, head)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 8 or header[0] != _SCORE_MAGIC:
            raise FormatError(f"{path}: not an attention score dump")
        t, h, w, kt, kh, kw, head = (int(x) for x in header[1:])
        payload = fh.read()
    expected = t * h * w * kt * kh * kw * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(t * h * w, kt * kh * kw).copy()
    return arr, (t, h, w), (kt, kh, kw), head
