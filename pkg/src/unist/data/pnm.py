"""Binary PNM (P5/P6) readers and writers, plus raw float32 sidecars.

8-bit only (maxval 255); pixel values decode to float v/255 and encode as
round(v*255). Parsing is strict so datasets are bit-reproducible: bad
magic, maxval, or payload size raise FormatError naming the file.
"""

from __future__ import annotations

import numpy as np

from ..errors import FormatError

_MAXVAL = 255


def _read_header(fh, path, magic: bytes):
    got = fh.read(2)
    if got != magic:
        raise FormatError(f"{path}: expected {magic.decode()} file, got magic {got!r}")

    def next_token():
        token = b""
        while True:
            ch = fh.read(1)
            if not ch:
                raise FormatError(f"{path}: truncated header")
            if ch == b"#":
                while ch not in (b"\n", b""):
                    ch = fh.read(1)
                continue
            if ch.isspace():
                if token:
                    return token
                continue
            token += ch

    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError:
        raise FormatError(f"{path}: non-numeric header field") from None
    if maxval != _MAXVAL:
        raise FormatError(f"{path}: only maxval {_MAXVAL} supported, got {maxval}")
    return width, height


def _to_bytes(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.dtype == np.uint8:
        return values
    return np.clip(np.rint(values * _MAXVAL), 0, _MAXVAL).astype(np.uint8)


def write_ppm(path, image) -> None:
    """Write (H, W, 3) floats in [0,1] (or uint8) as binary P6."""
    data = _to_bytes(image)
    if data.ndim != 3 or data.shape[2] != 3:
        raise FormatError(f"ppm needs (H,W,3), got {data.shape}")
    h, w, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n{_MAXVAL}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read binary P6; returns (H, W, 3) float32 in [0,1]."""
    with open(path, "rb") as fh:
        width, height = _read_header(fh, path, b"P6")
        payload = fh.read(width * height * 3)
        if len(payload) != width * height * 3:
            raise FormatError(f"{path}: truncated pixel data")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return raw.astype(np.float32) / _MAXVAL


def write_pgm(path, image) -> None:
    """Write (H, W) floats in [0,1] (or uint8) as binary P5."""
    data = _to_bytes(image)
    if data.ndim != 2:
        raise FormatError(f"pgm needs (H,W), got {data.shape}")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{_MAXVAL}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read binary P5; returns (H, W) float32 in [0,1]."""
    with open(path, "rb") as fh:
        width, height = _read_header(fh, path, b"P5")
        payload = fh.read(width * height)
        if len(payload) != width * height:
            raise FormatError(f"{path}: truncated pixel data")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return raw.astype(np.float32) / _MAXVAL


def write_f32(path, array) -> None:
    """Raw little-endian float32 sidecar (row-major, no header)."""
    np.ascontiguousarray(array, dtype="<f4").tofile(path)


def read_f32(path, shape) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise FormatError(f"{path}: {arr.size} floats, expected {expected} for shape {tuple(shape)}")
    return arr.reshape(shape)
