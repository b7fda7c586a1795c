"""Strided cross-correlation kernels (the deep-learning "convolution").

Layouts are channels-last: inputs ``(T, h, w, Cin)`` with weights
``(kt, kh, kw, Cin, Cout)``. The forward pass lowers patches to a matrix
(im2col) and multiplies; the backward pass scatters patch gradients back in
a fixed kernel-offset order, keeping runs bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, ShapeError
from .tensor import Tensor, _make


def _out_dim(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def conv3d(x: Tensor, weight: Tensor, stride=(1, 1, 1), padding=(0, 0, 0)) -> Tensor:
    """Strided 3-D cross-correlation of ``(T,h,w,Cin)`` with ``(kt,kh,kw,Cin,Cout)``."""
    if x.ndim != 4:
        raise ShapeError(f"conv3d expects input (T,h,w,Cin), got {x.shape}")
    if weight.ndim != 5:
        raise ShapeError(f"conv3d expects weight (kt,kh,kw,Cin,Cout), got {weight.shape}")
    kt, kh, kw, ci_w, co = weight.shape
    t, h, w, ci = x.shape
    if ci != ci_w:
        raise ShapeError(f"conv3d: input channels {ci} != weight channels {ci_w}")
    st, sh, sw = (int(s) for s in stride)
    pt, ph, pw = (int(p) for p in padding)
    if min(st, sh, sw) < 1:
        raise ConfigError(f"conv3d: stride must be >= 1 per axis, got {stride}")
    if min(pt, ph, pw) < 0:
        raise ConfigError(f"conv3d: padding must be >= 0 per axis, got {padding}")
    if kt > t + 2 * pt or kh > h + 2 * ph or kw > w + 2 * pw:
        raise ConfigError(
            f"conv3d: kernel ({kt},{kh},{kw}) larger than padded input "
            f"({t + 2 * pt},{h + 2 * ph},{w + 2 * pw})"
        )

    to, ho, wo = _out_dim(t, kt, st, pt), _out_dim(h, kh, sh, ph), _out_dim(w, kw, sw, pw)
    xp = np.pad(x.data, ((pt, pt), (ph, ph), (pw, pw), (0, 0)))
    windows = sliding_window_view(xp, (kt, kh, kw), axis=(0, 1, 2))
    windows = windows[::st, ::sh, ::sw]  # (to,ho,wo,Cin,kt,kh,kw)
    patches = np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 6, 3))
    patches2d = patches.reshape(to * ho * wo, kt * kh * kw * ci)
    w2d = weight.data.reshape(kt * kh * kw * ci, co)
    out = (patches2d @ w2d).reshape(to, ho, wo, co)

    padded_shape = xp.shape

    def backward_fn(g):
        g2d = g.reshape(to * ho * wo, co)
        grad_w = (patches2d.T @ g2d).reshape(weight.shape)
        grad_patches = (g2d @ w2d.T).reshape(to, ho, wo, kt, kh, kw, ci)
        grad_xp = np.zeros(padded_shape, dtype=g.dtype)
        for dt in range(kt):
            for dh in range(kh):
                for dw in range(kw):
                    grad_xp[
                        dt : dt + to * st : st,
                        dh : dh + ho * sh : sh,
                        dw : dw + wo * sw : sw,
                    ] += grad_patches[:, :, :, dt, dh, dw, :]
        grad_x = grad_xp[pt : pt + t, ph : ph + h, pw : pw + w]
        return grad_x, grad_w

    return _make("conv3d", out, (x, weight), backward_fn)


def conv2d(x: Tensor, weight: Tensor, stride=(1, 1), padding=(0, 0)) -> Tensor:
    """2-D cross-correlation; a leading axis, if present, is a frame batch.

    ``x`` is ``(h,w,Cin)`` or ``(T,h,w,Cin)`` with weight ``(kh,kw,Cin,Cout)``;
    frames share the weights and never mix.
    """
    if weight.ndim != 4:
        raise ShapeError(f"conv2d expects weight (kh,kw,Cin,Cout), got {weight.shape}")
    sh, sw = stride
    ph, pw = padding
    w3 = weight.reshape((1,) + weight.shape)
    if x.ndim == 3:
        out = conv3d(x.reshape((1,) + x.shape), w3, (1, sh, sw), (0, ph, pw))
        return out.reshape(out.shape[1:])
    if x.ndim == 4:
        return conv3d(x, w3, (1, sh, sw), (0, ph, pw))
    raise ShapeError(f"conv2d expects input (h,w,Cin) or (T,h,w,Cin), got {x.shape}")
