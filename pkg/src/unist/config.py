"""Run configuration: flat key=value text with sections (INI).

Every key has a default; the desk-scale defaults are small enough for CPU
gradient checks. ``preset = paper-vsp`` / ``paper-vsod`` switches to the
full-scale geometry (224x384 input, T=16 or T=5); explicit keys still
override the preset.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError

PRESETS = {
    "desk": {},
    "paper-vsp": {"height": 224, "width": 384, "clip_len": 16, "task": "vsp"},
    "paper-vsod": {"height": 224, "width": 384, "clip_len": 5, "task": "vsod"},
}

_TASK_DEFAULT_CLIP_LEN = {"vsp": 4, "vsod": 3}


@dataclass
class RunConfig:
    # [run]
    task: str = "vsp"
    steps: int = 500
    seed: int = 0
    out_dir: str = "runs/out"
    checkpoint_every: int = 0  # 0 = final checkpoint only
    dtype: str = "float32"
    # [model]
    height: int = 64
    width: int = 96
    clip_len: int | None = None  # None = per-task default (vsp 4, vsod 3)
    channels: tuple = (8, 16, 32, 64)
    heads: int = 2
    num_stages: int = 4
    blocks_per_stage: int = 1
    disable_saliency_transfer: bool = False
    disable_semantic_guided: bool = False
    aggregate_kernel: int = 3
    # [loss]
    lambda1: float = -0.1
    lambda2: float = -0.1
    # [optim]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # [data]
    dataset_root: str = "data"

    def resolved_clip_len(self) -> int:
        return self.clip_len if self.clip_len is not None else _TASK_DEFAULT_CLIP_LEN[self.task]

    def validate(self) -> "RunConfig":
        if self.task not in ("vsp", "vsod"):
            raise ConfigError(f"task: must be 'vsp' or 'vsod', got {self.task!r}")
        if self.height % 32 != 0 or self.width % 32 != 0:
            raise ConfigError(f"height/width: must be divisible by 32, got {self.height}x{self.width}")
        if self.height < 64 or self.width < 64:
            raise ConfigError(
                f"height/width: must be >= 64 so the key/value pooling kernels fit, got {self.height}x{self.width}"
            )
        t = self.resolved_clip_len()
        if t < 1:
            raise ConfigError(f"clip_len: must be >= 1, got {t}")
        c = tuple(self.channels)
        if len(c) != 4 or any(x < 1 for x in c):
            raise ConfigError(f"channels: need 4 positive entries, got {c}")
        if any(a > b for a, b in zip(c, c[1:])):
            raise ConfigError(f"channels: must be non-decreasing, got {c}")
        if self.heads < 1:
            raise ConfigError(f"heads: must be >= 1, got {self.heads}")
        if any(x % self.heads != 0 for x in c):
            raise ConfigError(f"channels: every entry must be divisible by heads={self.heads}, got {c}")
        if not 1 <= self.num_stages <= 4:
            raise ConfigError(f"num_stages: must be in 1..4, got {self.num_stages}")
        if self.blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage: must be >= 1, got {self.blocks_per_stage}")
        if self.aggregate_kernel < 1 or self.aggregate_kernel % 2 == 0:
            raise ConfigError(f"aggregate_kernel: must be odd and >= 1, got {self.aggregate_kernel}")
        if self.steps < 1:
            raise ConfigError(f"steps: must be >= 1, got {self.steps}")
        if self.lr <= 0:
            raise ConfigError(f"lr: must be positive, got {self.lr}")
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"{name}: must be in [0, 1), got {b}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype: must be float32 or float64, got {self.dtype!r}")
        return self


_SECTIONS = {
    "run": ("task", "steps", "seed", "out_dir", "checkpoint_every", "dtype", "preset"),
    "model": (
        "height",
        "width",
        "clip_len",
        "channels",
        "heads",
        "num_stages",
        "blocks_per_stage",
        "disable_saliency_transfer",
        "disable_semantic_guided",
        "aggregate_kernel",
    ),
    "loss": ("lambda1", "lambda2"),
    "optim": ("lr", "beta1", "beta2", "adam_eps"),
    "data": ("root",),
}

_KEY_TO_FIELD = {("data", "root"): "dataset_root"}


def _parse_value(field_name: str, raw: str):
    raw = raw.strip()
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = kinds[field_name]
    try:
        if field_name == "channels":
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(int(p) for p in parts)
        if field_name == "clip_len":
            return None if raw == "" else int(raw)
        if kind == "bool" or isinstance(getattr(RunConfig, field_name, None), bool):
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int" or isinstance(getattr(RunConfig, field_name, None), int):
            return int(raw)
        if kind == "float" or isinstance(getattr(RunConfig, field_name, None), float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{field_name}: cannot parse value {raw!r}") from None


def load_config(path) -> RunConfig:
    """Read a config file; unknown sections or keys are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    values: dict = {}
    preset_name = "desk"
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            if (section, key) == ("run", "preset"):
                preset_name = raw.strip()
                continue
            field_name = _KEY_TO_FIELD.get((section, key), key)
            values[field_name] = _parse_value(field_name, raw)

    if preset_name not in PRESETS:
        raise ConfigError(f"preset: must be one of {sorted(PRESETS)}, got {preset_name!r}")
    config = replace(RunConfig(), **PRESETS[preset_name])
    config = replace(config, **values)
    return config.validate()
