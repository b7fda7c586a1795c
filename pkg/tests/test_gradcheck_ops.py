"""Finite-difference gradient checks for every differentiable op (float64).

Engine contract: relative error below 1e-3 on random small inputs.
"""

import numpy as np
import pytest

from unist.engine import (
    Tensor,
    add,
    clip,
    concat,
    conv2d,
    conv3d,
    div,
    exp,
    finite_difference_check,
    interpolate_bilinear,
    interpolate_bilinear2x,
    log,
    matmul,
    min_elementwise,
    mul,
    permute,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
)
from unist.engine.nn import BatchNorm, FrameNorm, LayerNorm

TOL = 1e-3


def check(build_loss, tensors):
    report = finite_difference_check(build_loss, tensors, rng=np.random.default_rng(0))
    assert report.max_rel_error < TOL, f"worst {report.worst_tensor}: {report.max_rel_error}"


@pytest.mark.usefixtures("f64")
class TestOpGradients:
    def test_matmul(self, rng):
        a = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        probe = rng.standard_normal((5, 6))
        check(lambda: reduce_sum(mul(matmul(a, b), Tensor(probe))), [("a", a), ("b", b)])

    def test_elementwise_chain(self, rng):
        x = Tensor(rng.uniform(0.2, 2.0, size=(4, 5)), requires_grad=True)
        y = Tensor(rng.uniform(0.2, 2.0, size=(4, 5)), requires_grad=True)
        check(lambda: reduce_sum(div(mul(x, y), add(x, y))), [("x", x), ("y", y)])

    def test_relu_away_from_kink(self, rng):
        v = rng.standard_normal((6, 6))
        v[np.abs(v) < 0.05] = 0.1
        x = Tensor(v, requires_grad=True)
        probe = rng.standard_normal((6, 6))
        check(lambda: reduce_sum(mul(relu(x), Tensor(probe))), [("x", x)])

    def test_sigmoid(self, rng):
        x = Tensor(rng.standard_normal((3, 7)), requires_grad=True)
        probe = rng.standard_normal((3, 7))
        check(lambda: reduce_sum(mul(sigmoid(x), Tensor(probe))), [("x", x)])

    def test_exp_log_sqrt(self, rng):
        x = Tensor(rng.uniform(0.5, 2.0, size=(8,)), requires_grad=True)
        check(lambda: reduce_sum(add(exp(x), add(log(x), sqrt(x)))), [("x", x)])

    def test_softmax(self, rng):
        x = Tensor(rng.standard_normal((4, 9)), requires_grad=True)
        probe = rng.standard_normal((4, 9))
        check(lambda: reduce_sum(mul(softmax(x, axis=1), Tensor(probe))), [("x", x)])

    def test_clip_interior(self, rng):
        x = Tensor(rng.uniform(0.2, 0.8, size=(10,)), requires_grad=True)
        check(lambda: reduce_sum(mul(clip(x, 0.0, 1.0), clip(x, 0.0, 1.0))), [("x", x)])

    def test_min_elementwise(self, rng):
        a = Tensor(rng.standard_normal((12,)), requires_grad=True)
        b = Tensor(rng.standard_normal((12,)), requires_grad=True)
        probe = rng.standard_normal((12,))
        check(lambda: reduce_sum(mul(min_elementwise(a, b), Tensor(probe))), [("a", a), ("b", b)])

    def test_reductions_and_shape_ops(self, rng):
        x = Tensor(rng.standard_normal((3, 4, 5)), requires_grad=True)

        def loss():
            y = permute(reshape(x, (3, 20)), (1, 0))
            return add(reduce_sum(mul(y, y)), reduce_mean(x, axis=(0, 2)).sum())

        check(loss, [("x", x)])

    def test_concat(self, rng):
        a = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        b = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        probe = rng.standard_normal((3, 6))
        check(lambda: reduce_sum(mul(concat([a, b], axis=1), Tensor(probe))), [("a", a), ("b", b)])

    def test_conv3d(self, rng):
        x = Tensor(rng.standard_normal((2, 6, 6, 2)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 3, 3, 2, 2)), requires_grad=True)
        probe_shape = (2, 3, 3, 2)
        probe = rng.standard_normal(probe_shape)
        check(
            lambda: reduce_sum(mul(conv3d(x, w, (1, 2, 2), (1, 1, 1)), Tensor(probe))),
            [("x", x), ("w", w)],
        )

    def test_conv2d(self, rng):
        x = Tensor(rng.standard_normal((6, 7, 2)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 3, 2, 3)), requires_grad=True)
        probe = rng.standard_normal((6, 7, 3))
        check(
            lambda: reduce_sum(mul(conv2d(x, w, padding=(1, 1)), Tensor(probe))),
            [("x", x), ("w", w)],
        )

    def test_interpolate(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 4, 2)), requires_grad=True)
        probe2x = rng.standard_normal((2, 6, 8, 2))
        check(lambda: reduce_sum(mul(interpolate_bilinear2x(x), Tensor(probe2x))), [("x", x)])
        probe = rng.standard_normal((2, 5, 3, 2))
        check(lambda: reduce_sum(mul(interpolate_bilinear(x, (5, 3)), Tensor(probe))), [("x", x)])


@pytest.mark.usefixtures("f64")
class TestNormGradients:
    def test_batch_norm(self, rng):
        norm = BatchNorm(3)
        x = Tensor(rng.standard_normal((2, 4, 4, 3)), requires_grad=True)
        probe = rng.standard_normal((2, 4, 4, 3))
        check(
            lambda: reduce_sum(mul(norm(x), Tensor(probe))),
            [("x", x)] + list(norm.named_parameters()),
        )

    def test_layer_norm(self, rng):
        norm = LayerNorm(5)
        x = Tensor(rng.standard_normal((7, 5)), requires_grad=True)
        probe = rng.standard_normal((7, 5))
        check(
            lambda: reduce_sum(mul(norm(x), Tensor(probe))),
            [("x", x)] + list(norm.named_parameters()),
        )

    def test_frame_norm(self, rng):
        norm = FrameNorm(2)
        x = Tensor(rng.standard_normal((3, 4, 5, 2)), requires_grad=True)
        probe = rng.standard_normal((3, 4, 5, 2))
        check(
            lambda: reduce_sum(mul(norm(x), Tensor(probe))),
            [("x", x)] + list(norm.named_parameters()),
        )
