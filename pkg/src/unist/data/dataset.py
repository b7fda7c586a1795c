"""On-disk dataset layout and loading.

    <root>/<clip_id>/frames/00000.ppm ... (binary P6, one per frame)
    <root>/<clip_id>/vsp/fixation.pgm    (binary P5, middle-frame fixations)
    <root>/<clip_id>/vsp/dense.pgm       (binary P5, dense gaze map)
    <root>/<clip_id>/vsod/00000.pgm ...  (binary P5, one mask per frame)

Iteration order is lexicographic in clip_id, so runs are stable across
platforms. Loading a task keeps only that task's targets on the records.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .pnm import read_pgm, read_ppm, write_pgm, write_ppm


@dataclass
class ClipRecord:
    """One clip with its annotations (numpy arrays, values in [0,1]).

    VSP targets (fixation + dense map) belong to the clip's middle frame,
    index ``T // 2``; VSOD masks cover every frame.
    """

    clip_id: str
    frames: np.ndarray  # (T, H, W, 3)
    fixation: np.ndarray | None = None  # (H, W) binary
    dense: np.ndarray | None = None  # (H, W) in [0,1]
    masks: np.ndarray | None = None  # (T, H, W) binary

    @property
    def clip_len(self) -> int:
        return self.frames.shape[0]

    @property
    def middle_frame(self) -> int:
        return self.frames.shape[0] // 2


def write_clip(root, record: ClipRecord) -> Path:
    """Write a clip (and whatever targets it carries) under ``root``."""
    clip_dir = Path(root) / record.clip_id
    frames_dir = clip_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for t in range(record.clip_len):
        write_ppm(frames_dir / f"{t:05d}.ppm", record.frames[t])
    if record.fixation is not None and record.dense is not None:
        vsp_dir = clip_dir / "vsp"
        vsp_dir.mkdir(exist_ok=True)
        write_pgm(vsp_dir / "fixation.pgm", record.fixation)
        write_pgm(vsp_dir / "dense.pgm", record.dense)
    if record.masks is not None:
        vsod_dir = clip_dir / "vsod"
        vsod_dir.mkdir(exist_ok=True)
        for t in range(record.masks.shape[0]):
            write_pgm(vsod_dir / f"{t:05d}.pgm", record.masks[t])
    return clip_dir


def load_clip(clip_dir, task: str | None = None) -> ClipRecord:
    """Load one clip directory; ``task`` selects which targets to attach."""
    clip_dir = Path(clip_dir)
    clip_id = clip_dir.name
    frames_dir = clip_dir / "frames"
    if not frames_dir.is_dir():
        raise DataError(f"clip {clip_id!r}: missing frames directory {frames_dir}")
    frame_paths = sorted(frames_dir.glob("*.ppm"))
    if not frame_paths:
        raise DataError(f"clip {clip_id!r}: no frames in {frames_dir}")
    frames = np.stack([read_ppm(p) for p in frame_paths])

    record = ClipRecord(clip_id=clip_id, frames=frames)
    if task in (None, "vsp"):
        fixation_path = clip_dir / "vsp" / "fixation.pgm"
        dense_path = clip_dir / "vsp" / "dense.pgm"
        if fixation_path.exists() and dense_path.exists():
            record.fixation = read_pgm(fixation_path)
            record.dense = read_pgm(dense_path)
        elif task == "vsp":
            missing = fixation_path if not fixation_path.exists() else dense_path
            raise DataError(f"clip {clip_id!r}: missing VSP target {missing}")
    if task in (None, "vsod"):
        mask_paths = sorted((clip_dir / "vsod").glob("*.pgm")) if (clip_dir / "vsod").is_dir() else []
        if mask_paths:
            if len(mask_paths) != frames.shape[0]:
                raise DataError(
                    f"clip {clip_id!r}: {len(mask_paths)} masks for {frames.shape[0]} frames in {clip_dir / 'vsod'}"
                )
            record.masks = np.stack([read_pgm(p) for p in mask_paths])
        elif task == "vsod":
            raise DataError(f"clip {clip_id!r}: missing VSOD masks in {clip_dir / 'vsod'}")
    return record


def load_dataset(root, task: str | None = None) -> list:
    """Load all clips under ``root`` in lexicographic clip_id order."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    records = []
    for clip_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        records.append(load_clip(clip_dir, task))
    return records
