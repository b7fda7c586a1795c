"""Dataset layout, PNM file formats, and synthetic clip generation."""

from .dataset import ClipRecord, load_clip, load_dataset, write_clip
from .pnm import read_f32, read_pgm, read_ppm, write_f32, write_pgm, write_ppm
from .synthetic import SyntheticSceneSpec, generate_synthetic

__all__ = [
    "ClipRecord",
    "SyntheticSceneSpec",
    "generate_synthetic",
    "load_clip",
    "load_dataset",
    "read_f32",
    "read_pgm",
    "read_ppm",
    "write_clip",
    "write_f32",
    "write_pgm",
    "write_ppm",
]
