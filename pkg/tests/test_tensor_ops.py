"""Core tensor ops: forward semantics, hand-checked cases, backward basics."""

import numpy as np
import pytest

from unist.engine import (
    Tensor,
    backward,
    concat,
    matmul,
    min_elementwise,
    mul,
    no_grad,
    permute,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    set_debug_checks,
    sigmoid,
    softmax,
)
from unist.errors import NumericError, ShapeError, UsageError


class TestMatmul:
    def test_identity(self):
        m = np.arange(9.0).reshape(3, 3)
        out = matmul(Tensor(np.eye(3)), Tensor(m))
        np.testing.assert_allclose(out.numpy(), m, rtol=1e-6)

    def test_hand_case(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_allclose(out.numpy(), [[3.0], [7.0]])

    def test_backward_formulas(self, rng):
        a = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        out = matmul(a, b)
        backward(reduce_sum(out))
        g = np.ones((5, 6), dtype=a.dtype)
        np.testing.assert_allclose(a.grad, g @ b.numpy().T, rtol=1e-5)
        np.testing.assert_allclose(b.grad, a.numpy().T @ g, rtol=1e-5)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_batched(self, rng):
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((2, 4, 5))
        out = matmul(Tensor(a), Tensor(b))
        np.testing.assert_allclose(out.numpy(), a @ b, rtol=1e-5)


class TestSoftmax:
    def test_uniform_rows(self):
        out = softmax(Tensor(np.zeros((3, 5))), axis=1)
        np.testing.assert_allclose(out.numpy(), np.full((3, 5), 0.2), atol=1e-7)

    def test_hand_case(self):
        out = softmax(Tensor([0.0, np.log(3.0)]), axis=0)
        np.testing.assert_allclose(out.numpy(), [0.25, 0.75], atol=1e-6)

    def test_rows_sum_to_one_and_in_range(self, rng):
        x = rng.standard_normal((40, 17)) * 10
        out = softmax(Tensor(x), axis=1).numpy()
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)
        assert (out > 0).all() and (out < 1).all()


class TestElementwise:
    def test_relu(self):
        out = relu(Tensor([-1.0, 2.0]))
        np.testing.assert_allclose(out.numpy(), [0.0, 2.0])

    def test_sigmoid_zero(self):
        assert sigmoid(Tensor([0.0])).numpy()[0] == pytest.approx(0.5)

    def test_sigmoid_extremes_finite(self):
        out = sigmoid(Tensor([-500.0, 500.0], dtype=np.float64)).numpy()
        assert np.all(np.isfinite(out))

    def test_concat_shapes(self, rng):
        a = rng.standard_normal((2, 3)).astype(np.float32)
        b = rng.standard_normal((2, 5)).astype(np.float32)
        out = concat([Tensor(a), Tensor(b)], axis=1)
        assert out.shape == (2, 8)
        np.testing.assert_array_equal(out.numpy(), np.concatenate([a, b], axis=1))

    def test_concat_mismatch(self):
        with pytest.raises(ShapeError):
            concat([Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3)))], axis=1)

    def test_min_elementwise(self):
        out = min_elementwise(Tensor([1.0, 5.0]), Tensor([2.0, 3.0]))
        np.testing.assert_allclose(out.numpy(), [1.0, 3.0])

    def test_broadcast_add_backward(self, rng):
        a = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((3,)), requires_grad=True)
        backward(reduce_sum(a + b))
        np.testing.assert_allclose(a.grad, np.ones((4, 3)))
        np.testing.assert_allclose(b.grad, np.full(3, 4.0))


class TestShapeOps:
    def test_reshape_roundtrip_bit_exact(self, rng):
        x = rng.standard_normal((3, 4, 5)).astype(np.float32)
        t = Tensor(x)
        back = reshape(reshape(t, (60,)), (3, 4, 5))
        assert np.array_equal(back.numpy(), x)

    def test_permute_roundtrip_bit_exact(self, rng):
        x = rng.standard_normal((3, 4, 5)).astype(np.float32)
        out = permute(permute(Tensor(x), (2, 0, 1)), (1, 2, 0))
        assert np.array_equal(out.numpy(), x)

    def test_reshape_element_count_check(self):
        with pytest.raises(ShapeError):
            reshape(Tensor(np.zeros((2, 3))), (4, 2))


class TestBackward:
    def test_sum_gives_ones(self, rng):
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        backward(reduce_sum(x))
        np.testing.assert_allclose(x.grad, np.ones((3, 4)))

    def test_square_gives_two_x(self, rng):
        v = rng.standard_normal((6,))
        x = Tensor(v, requires_grad=True)
        backward(reduce_sum(mul(x, x)))
        np.testing.assert_allclose(x.grad, 2 * v, rtol=1e-6)

    def test_non_scalar_rejected(self):
        x = Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(UsageError):
            backward(x + x)

    def test_reuse_of_tensor_accumulates(self, rng):
        x = Tensor(rng.standard_normal((4,)), requires_grad=True)
        backward(reduce_sum(x + x))
        np.testing.assert_allclose(x.grad, np.full(4, 2.0))

    def test_no_grad_disables_recording(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = reduce_sum(x)
        assert not y.requires_grad

    def test_unreachable_parameter_keeps_zero_grad(self, rng):
        x = Tensor(rng.standard_normal((3,)), requires_grad=True)
        unused = Tensor(rng.standard_normal((3,)), requires_grad=True)
        unused.zero_grad()
        backward(reduce_sum(x))
        np.testing.assert_array_equal(unused.grad, np.zeros(3))

    def test_mean_backward(self, rng):
        x = Tensor(rng.standard_normal((2, 6)), requires_grad=True)
        backward(reduce_mean(x))
        np.testing.assert_allclose(x.grad, np.full((2, 6), 1.0 / 12.0), rtol=1e-6)


class TestDebugChecks:
    def test_nan_detected_when_enabled(self):
        set_debug_checks(True)
        try:
            with pytest.raises(NumericError):
                mul(Tensor([np.inf]), Tensor([0.0]))
        finally:
            set_debug_checks(False)

    def test_disabled_by_default(self):
        out = mul(Tensor([np.inf]), Tensor([0.0]))
        assert np.isnan(out.numpy()[0])
