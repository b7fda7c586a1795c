"""Convolutions against naive nested-loop oracles."""

import numpy as np
import pytest

from unist.engine import Tensor, conv2d, conv3d
from unist.errors import ConfigError, ShapeError


def conv3d_oracle(x, w, stride, padding):
    """Direct six-nested-loop cross-correlation (plus channel loops)."""
    st, sh, sw = stride
    pt, ph, pw = padding
    kt, kh, kw, ci, co = w.shape
    xp = np.pad(x, ((pt, pt), (ph, ph), (pw, pw), (0, 0)))
    to = (x.shape[0] + 2 * pt - kt) // st + 1
    ho = (x.shape[1] + 2 * ph - kh) // sh + 1
    wo = (x.shape[2] + 2 * pw - kw) // sw + 1
    out = np.zeros((to, ho, wo, co))
    for a in range(to):
        for b in range(ho):
            for c in range(wo):
                for oc in range(co):
                    acc = 0.0
                    for dt in range(kt):
                        for dh in range(kh):
                            for dw in range(kw):
                                for ic in range(ci):
                                    acc += xp[a * st + dt, b * sh + dh, c * sw + dw, ic] * w[dt, dh, dw, ic, oc]
                    out[a, b, c, oc] = acc
    return out


class TestConv3d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((3, 4, 5, 1)).astype(np.float32)
        w = np.ones((1, 1, 1, 1, 1), dtype=np.float32)
        out = conv3d(Tensor(x), Tensor(w))
        np.testing.assert_allclose(out.numpy(), x, rtol=1e-6)

    def test_shape_temporal_preserved(self, rng):
        x = rng.standard_normal((4, 8, 8, 2)).astype(np.float32)
        w = rng.standard_normal((1, 2, 2, 2, 3)).astype(np.float32)
        out = conv3d(Tensor(x), Tensor(w), stride=(1, 2, 2))
        assert out.shape == (4, 4, 4, 3)
        np.testing.assert_allclose(out.numpy(), conv3d_oracle(x, w, (1, 2, 2), (0, 0, 0)), rtol=1e-4, atol=1e-5)

    # every stride/padding combination the model uses
    @pytest.mark.parametrize(
        "kernel,stride,padding",
        [
            ((3, 3, 3), (1, 1, 1), (1, 1, 1)),  # Q embedding / semantic blocks
            ((1, 2, 2), (1, 2, 2), (0, 0, 0)),  # K/V pooling, level 4
            ((1, 4, 4), (1, 4, 4), (0, 0, 0)),  # K/V pooling, level 3
            ((1, 1, 1), (1, 1, 1), (0, 0, 0)),  # channel adjust
            ((2, 3, 3), (1, 1, 1), (0, 1, 1)),  # VSP temporal collapse (T=2)
        ],
    )
    def test_against_loop_oracle(self, rng, kernel, stride, padding):
        x = rng.standard_normal((2, 8, 8, 3))
        w = rng.standard_normal(kernel + (3, 2))
        out = conv3d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride, padding)
        expected = conv3d_oracle(x, w, stride, padding)
        assert np.abs(out.numpy() - expected).max() < 1e-5

    def test_kernel_too_large(self):
        with pytest.raises(ConfigError, match="larger than padded input"):
            conv3d(Tensor(np.zeros((1, 2, 2, 1))), Tensor(np.zeros((1, 4, 4, 1, 1))))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv3d(Tensor(np.zeros((1, 4, 4, 2))), Tensor(np.zeros((1, 3, 3, 3, 1))))

    def test_bad_stride(self):
        with pytest.raises(ConfigError):
            conv3d(Tensor(np.zeros((1, 4, 4, 1))), Tensor(np.zeros((1, 2, 2, 1, 1))), stride=(1, 0, 1))


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((5, 6, 1)).astype(np.float32)
        out = conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1), dtype=np.float32)))
        np.testing.assert_allclose(out.numpy(), x, rtol=1e-6)

    def test_averaging_kernel_preserves_constant_interior(self):
        x = np.full((6, 6, 1), 3.0, dtype=np.float32)
        w = np.full((3, 3, 1, 1), 1.0 / 9.0, dtype=np.float32)
        out = conv2d(Tensor(x), Tensor(w), padding=(1, 1)).numpy()
        np.testing.assert_allclose(out[1:-1, 1:-1, 0], 3.0, rtol=1e-5)

    def test_against_loop_oracle(self, rng):
        x = rng.standard_normal((7, 9, 2))
        w = rng.standard_normal((3, 3, 2, 4))
        out = conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride=(2, 2), padding=(1, 1))
        expected = conv3d_oracle(x[None], w[None], (1, 2, 2), (0, 1, 1))[0]
        assert np.abs(out.numpy() - expected).max() < 1e-5

    def test_frame_batch_matches_per_frame(self, rng):
        x = rng.standard_normal((3, 6, 6, 2)).astype(np.float32)
        w = Tensor(rng.standard_normal((3, 3, 2, 2)).astype(np.float32))
        batched = conv2d(Tensor(x), w, padding=(1, 1)).numpy()
        for t in range(3):
            single = conv2d(Tensor(x[t]), w, padding=(1, 1)).numpy()
            np.testing.assert_array_equal(batched[t], single)
