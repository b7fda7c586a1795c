"""Synthetic moving-blob clips with exact saliency annotations.

Each clip is a textured background with bright disks moving at constant
velocity. Ground truth comes for free: per-frame binary disk masks for
detection, and for gaze prediction a fixation at each blob center of the
middle frame plus its Gaussian-blurred dense map. Generation is a pure
function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ConfigError
from .dataset import ClipRecord


@dataclass(frozen=True)
class SyntheticSceneSpec:
    height: int = 64
    width: int = 96
    clip_len: int = 4
    num_blobs: int = 2
    min_radius: int = 4
    max_radius: int = 7
    max_speed: float = 2.0  # pixels per frame, per axis
    contrast: float = 0.6  # blob brightness above the background
    texture_cells: int = 6  # background noise grid (upsampled to full size)
    blur_sigma: float | None = None  # dense-map blur; default height/24
    blobs: tuple | None = None  # optional explicit (y0, x0, vy, vx, radius) rows

    def resolved_sigma(self) -> float:
        return self.blur_sigma if self.blur_sigma is not None else self.height / 24.0


def _blob_track(spec: SyntheticSceneSpec, y0, x0, vy, vx, radius):
    """Centers for every frame; raises if the disk ever leaves the frame."""
    centers = []
    for t in range(spec.clip_len):
        y, x = y0 + vy * t, x0 + vx * t
        if not (radius <= y <= spec.height - 1 - radius and radius <= x <= spec.width - 1 - radius):
            raise ConfigError(
                f"blob leaves the frame at t={t}: center ({y:.1f},{x:.1f}), radius {radius}"
            )
        centers.append((y, x))
    return centers


def _random_blobs(spec: SyntheticSceneSpec, rng: np.random.Generator):
    blobs = []
    for _ in range(spec.num_blobs):
        radius = int(rng.integers(spec.min_radius, spec.max_radius + 1))
        vy = float(rng.uniform(-spec.max_speed, spec.max_speed))
        vx = float(rng.uniform(-spec.max_speed, spec.max_speed))
        # start inside the box that keeps the whole trajectory in bounds
        last = spec.clip_len - 1
        y_lo = radius + max(0.0, -vy * last)
        y_hi = spec.height - 1 - radius - max(0.0, vy * last)
        x_lo = radius + max(0.0, -vx * last)
        x_hi = spec.width - 1 - radius - max(0.0, vx * last)
        if y_hi <= y_lo or x_hi <= x_lo:
            raise ConfigError(
                f"no feasible start position for radius {radius} and speed ({vy:.2f},{vx:.2f})"
            )
        y0 = float(rng.uniform(y_lo, y_hi))
        x0 = float(rng.uniform(x_lo, x_hi))
        blobs.append((y0, x0, vy, vx, radius))
    return blobs


def _background(spec: SyntheticSceneSpec, rng: np.random.Generator) -> np.ndarray:
    cells_h = max(2, spec.texture_cells)
    cells_w = max(2, int(round(spec.texture_cells * spec.width / spec.height)))
    coarse = rng.uniform(0.05, 0.35, size=(cells_h, cells_w, 3)).astype(np.float64)
    ys = np.linspace(0, cells_h - 1, spec.height)
    xs = np.linspace(0, cells_w - 1, spec.width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, cells_h - 1)
    x1 = np.minimum(x0 + 1, cells_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = coarse[y0][:, x0] * (1 - fx) + coarse[y0][:, x1] * fx
    bottom = coarse[y1][:, x0] * (1 - fx) + coarse[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def generate_synthetic(spec: SyntheticSceneSpec, seed: int, clip_id: str | None = None) -> ClipRecord:
    """Render one clip and both target sets; deterministic in (spec, seed)."""
    rng = np.random.default_rng(seed)
    blobs = spec.blobs if spec.blobs is not None else _random_blobs(spec, rng)
    tracks = [_blob_track(spec, *blob) for blob in blobs]
    background = _background(spec, rng)

    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width]
    frames = np.empty((spec.clip_len, spec.height, spec.width, 3), dtype=np.float32)
    masks = np.zeros((spec.clip_len, spec.height, spec.width), dtype=np.float32)
    for t in range(spec.clip_len):
        frame = background.copy()
        for (_, _, _, _, radius), centers in zip(blobs, tracks):
            cy, cx = centers[t]
            disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
            masks[t][disk] = 1.0
            frame[disk] += spec.contrast
        frames[t] = np.clip(frame, 0.0, 1.0)

    middle = spec.clip_len // 2
    fixation = np.zeros((spec.height, spec.width), dtype=np.float32)
    for centers in tracks:
        cy, cx = centers[middle]
        fixation[int(round(cy)), int(round(cx))] = 1.0
    dense = gaussian_filter(fixation.astype(np.float64), sigma=spec.resolved_sigma())
    dense = (dense / dense.max()).astype(np.float32)

    return ClipRecord(
        clip_id=clip_id or f"clip_{seed:05d}",
        frames=frames,
        fixation=fixation,
        dense=dense,
        masks=masks,
    )
