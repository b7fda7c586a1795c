"""Bilinear interpolation over the two spatial axes of ``(T, h, w, C)`` maps.

Sampling uses half-pixel centers with edge clamping: the source coordinate
for destination index ``d`` is ``(d + 0.5) * src/dst - 0.5``, clipped to the
valid range. Resizing is realized as two dense matrix products (one per
spatial axis), which keeps the backward pass a pair of transposed products
and makes results bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, _make


def interp_matrix(n_src: int, n_dst: int, dtype) -> np.ndarray:
    """Dense ``(n_dst, n_src)`` bilinear sampling matrix; rows sum to one."""
    scale = n_src / n_dst
    dst = np.arange(n_dst)
    src = np.clip((dst + 0.5) * scale - 0.5, 0.0, n_src - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_src - 1)
    frac = (src - i0).astype(dtype)
    m = np.zeros((n_dst, n_src), dtype=dtype)
    np.add.at(m, (dst, i0), 1.0 - frac)
    np.add.at(m, (dst, i1), frac)
    return m


def _apply_axis(data: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(data, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = m @ flat
    out = out.reshape((m.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, axis)


def interpolate_bilinear(x: Tensor, out_hw: tuple) -> Tensor:
    """Resize axes 1 and 2 of a ``(T,h,w,C)`` tensor to ``out_hw``."""
    if x.ndim != 4:
        raise ShapeError(f"interpolate expects (T,h,w,C), got {x.shape}")
    t, h, w, c = x.shape
    h2, w2 = (int(n) for n in out_hw)
    if h2 < 1 or w2 < 1:
        raise ShapeError(f"interpolate: target size {out_hw} invalid")
    mh = interp_matrix(h, h2, x.data.dtype)
    mw = interp_matrix(w, w2, x.data.dtype)
    out = _apply_axis(_apply_axis(x.data, mh, 1), mw, 2)

    def backward_fn(g):
        gx = _apply_axis(_apply_axis(g, mh.T, 1), mw.T, 2)
        return (gx,)

    return _make("interpolate_bilinear", out, (x,), backward_fn)


def interpolate_bilinear2x(x: Tensor) -> Tensor:
    """Double the spatial dimensions of ``(T,h,w,C)``; temporal axis untouched."""
    t, h, w, c = x.shape
    return interpolate_bilinear(x, (2 * h, 2 * w))
