"""End-to-end model: pyramid encoder -> saliency transformer -> task head."""

from __future__ import annotations

import numpy as np

from .decoders import VSODDecoder, VSPDecoder
from .encoder import EncoderConfig, PyramidEncoder, VideoClip
from .engine import Tensor
from .engine.nn import Module
from .errors import ConfigError
from .transformer import SaliencyTransformer

TASKS = ("vsp", "vsod")


class UniSTModel(Module):
    """The full trainable pipeline for one task.

    Built deterministically from a seed: construction draws all weights from
    one ``numpy.random.Generator`` in a fixed order.
    """

    def __init__(
        self,
        task: str,
        channels: tuple,
        clip_len: int,
        rng: np.random.Generator,
        heads: int = 2,
        num_stages: int = 4,
        blocks_per_stage: int = 1,
        use_semantic_guided: bool = True,
        use_saliency_transfer: bool = True,
        aggregate_kernel: int = 3,
    ):
        super().__init__()
        if task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
        self.task = task
        self.clip_len = clip_len
        self.encoder = PyramidEncoder(EncoderConfig(channels=tuple(channels)), rng)
        self.transformer = SaliencyTransformer(
            channels=tuple(channels),
            rng=rng,
            heads=heads,
            num_stages=num_stages,
            blocks_per_stage=blocks_per_stage,
            use_semantic_guided=use_semantic_guided,
            use_saliency_transfer=use_saliency_transfer,
            aggregate_kernel=aggregate_kernel,
        )
        if task == "vsp":
            self.decoder = VSPDecoder(channels[0], clip_len, rng)
        else:
            self.decoder = VSODDecoder(channels[0], rng)

    def forward(self, frames: Tensor, out_size: tuple | None = None) -> Tensor:
        """Map (T,H,W,3) frames to a (H_out,W_out) saliency map (vsp) or a
        (T,H_out,W_out) mask sequence (vsod). ``out_size`` defaults to the
        input resolution."""
        prediction, _ = self.forward_with_scores(frames, out_size)
        return prediction

    def forward_with_scores(self, frames: Tensor, out_size: tuple | None = None):
        """Forward pass that also returns the per-stage attention scores."""
        if out_size is None:
            out_size = frames.shape[1:3]
        clip = VideoClip(frames=frames)
        pyramid = self.encoder(clip)
        stage_outputs, scores = self.transformer.run_stages(pyramid)
        fused = self.transformer.aggregate(stage_outputs, pyramid)
        return self.decoder(fused, out_size), scores
