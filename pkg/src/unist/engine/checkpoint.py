"""Binary checkpoint format.

Layout (all integers little-endian):

    magic          4 bytes  b"USTC"
    format version u32      1 = float32 payloads, 2 = float64 payloads
    entry count    u32
    per entry:
        name length  u16
        name         UTF-8 bytes
        rank         u8
        dims         rank x u32
        payload      row-major floats, little-endian

Round-trips are bit-exact for the engine's active dtype.
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from ..errors import FormatError

MAGIC = b"USTC"
_VERSION_BY_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_DTYPE_BY_VERSION = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def save_state(path, entries: "dict[str, np.ndarray]") -> None:
    """Write a name->array mapping; all arrays must share one float dtype."""
    items = list(entries.items())
    dtypes = {np.dtype(a.dtype) for _, a in items}
    if len(dtypes) > 1:
        raise FormatError(f"checkpoint entries must share one dtype, got {sorted(map(str, dtypes))}")
    dtype = dtypes.pop() if dtypes else np.dtype(np.float32)
    if dtype not in _VERSION_BY_DTYPE:
        raise FormatError(f"unsupported checkpoint dtype {dtype}")
    version = _VERSION_BY_DTYPE[dtype]
    wire_dtype = _DTYPE_BY_VERSION[version]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", version, len(items)))
        for name, arr in items:
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"state name too long: {name!r}")
            if arr.ndim > 255:
                raise FormatError(f"rank {arr.ndim} exceeds format limit for {name!r}")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(arr, dtype=wire_dtype).tobytes())


def load_state(path) -> "OrderedDict[str, np.ndarray]":
    """Read a checkpoint; raises FormatError on any malformed content."""
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    if len(view) < 12 or bytes(view[:4]) != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", view, 4)
    if version not in _DTYPE_BY_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    dtype = _DTYPE_BY_VERSION[version]
    offset = 12
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", view, offset)
            offset += 2
            name = bytes(view[offset : offset + name_len]).decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", view, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", view, offset) if rank else ()
            offset += 4 * rank
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            nbytes = n * dtype.itemsize
            if offset + nbytes > len(view):
                raise FormatError(f"{path}: truncated payload for {name!r}")
            arr = np.frombuffer(view[offset : offset + nbytes], dtype=dtype).reshape(dims).copy()
            offset += nbytes
            if name in out:
                raise FormatError(f"{path}: duplicate entry {name!r}")
            out[name] = arr
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint ({exc})") from None
    if offset != len(view):
        raise FormatError(f"{path}: {len(view) - offset} trailing bytes")
    return out
