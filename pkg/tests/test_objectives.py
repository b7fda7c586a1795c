"""Loss functions: hand-computed values, identities, gradients."""

import numpy as np
import pytest

from unist.engine import Tensor, backward, finite_difference_check
from unist.errors import DegenerateInputError, ShapeError
from unist.objectives import (
    LossWeights,
    cc_loss,
    kl_loss,
    normalize_sum,
    sim_loss,
    vsod_bce,
    vsp_loss,
)


def t64(a, requires_grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=requires_grad, dtype=np.float64)


class TestNormalizeSum:
    def test_hand_case(self):
        out = normalize_sum(t64([1.0, 3.0]))
        np.testing.assert_allclose(out.numpy(), [0.25, 0.75])

    def test_already_normalized_unchanged(self):
        out = normalize_sum(t64([0.25, 0.75]))
        np.testing.assert_allclose(out.numpy(), [0.25, 0.75], atol=1e-12)

    def test_sums_to_one(self, rng):
        out = normalize_sum(t64(rng.uniform(0, 5, size=(13, 7))))
        assert abs(out.numpy().sum() - 1.0) < 1e-6

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateInputError):
            normalize_sum(t64(np.zeros((3, 3))))


class TestKLLoss:
    def test_identity_is_zero(self, rng):
        g = rng.uniform(0.1, 1.0, size=(6, 6))
        value = float(kl_loss(t64(g), t64(g)).data)
        assert abs(value) < 5e-6

    def test_hand_case(self):
        # g = [0.5, 0.5], p = [0.25, 0.75]:
        # 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75) = 0.5*ln2 + 0.5*ln(2/3)
        value = float(kl_loss(t64([0.25, 0.75]), t64([0.5, 0.5])).data)
        expected = 0.5 * np.log(2.0) + 0.5 * np.log(2.0 / 3.0)
        assert value == pytest.approx(expected, abs=1e-5)
        assert value == pytest.approx(0.1438, abs=1e-4)

    def test_nonnegative(self, rng):
        for _ in range(20):
            p = rng.uniform(0.01, 1.0, size=(5, 4))
            g = rng.uniform(0.01, 1.0, size=(5, 4))
            assert float(kl_loss(t64(p), t64(g)).data) >= -1e-9

    def test_gradient(self, rng, f64):
        p = t64(rng.uniform(0.1, 0.9, size=(4, 5)), requires_grad=True)
        g = t64(rng.uniform(0.1, 1.0, size=(4, 5)))
        report = finite_difference_check(lambda: kl_loss(p, g), [("p", p)], rng=rng)
        assert report.max_rel_error < 1e-3

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            kl_loss(t64(np.ones((2, 2))), t64(np.ones((2, 3))))


class TestCCLoss:
    def test_perfect_correlation(self, rng):
        g = rng.uniform(0, 1, size=(6, 6))
        assert float(cc_loss(t64(g), t64(g)).data) == pytest.approx(-1.0, abs=1e-6)

    def test_anti_correlation(self, rng):
        g = rng.uniform(0, 1, size=(6, 6))
        assert float(cc_loss(t64(1.0 - g), t64(g)).data) == pytest.approx(1.0, abs=1e-6)

    def test_against_two_pass_oracle(self, rng):
        p = rng.uniform(0, 1, size=(8, 8))
        g = rng.uniform(0, 1, size=(8, 8))
        cov = np.mean((p - p.mean()) * (g - g.mean()))
        expected = -cov / (p.std() * g.std())
        assert float(cc_loss(t64(p), t64(g)).data) == pytest.approx(expected, abs=1e-6)

    def test_affine_invariance(self, rng):
        p = rng.uniform(0, 1, size=(7, 7))
        g = rng.uniform(0, 1, size=(7, 7))
        base = float(cc_loss(t64(p), t64(g)).data)
        scaled = float(cc_loss(t64(2.5 * p + 0.3), t64(g)).data)
        assert scaled == pytest.approx(base, abs=1e-6)

    def test_constant_map_rejected(self):
        with pytest.raises(DegenerateInputError):
            cc_loss(t64(np.full((3, 3), 0.5)), t64(np.eye(3)))

    def test_gradient(self, rng, f64):
        p = t64(rng.uniform(0.1, 0.9, size=(5, 4)), requires_grad=True)
        g = t64(rng.uniform(0.0, 1.0, size=(5, 4)))
        report = finite_difference_check(lambda: cc_loss(p, g), [("p", p)], rng=rng)
        assert report.max_rel_error < 1e-3


class TestSIMLoss:
    def test_identity_is_one(self, rng):
        g = rng.uniform(0.1, 1.0, size=(5, 5))
        assert float(sim_loss(t64(g), t64(g)).data) == pytest.approx(1.0, abs=1e-7)

    def test_disjoint_supports_give_zero(self):
        p = np.array([1.0, 1.0, 0.0, 0.0])
        g = np.array([0.0, 0.0, 1.0, 1.0])
        assert float(sim_loss(t64(p), t64(g)).data) == pytest.approx(0.0, abs=1e-9)

    def test_hand_case(self):
        # normalized maps [0.2, 0.8] and [0.5, 0.5] -> 0.2 + 0.5
        assert float(sim_loss(t64([0.2, 0.8]), t64([0.5, 0.5])).data) == pytest.approx(0.7, abs=1e-7)

    def test_symmetry(self, rng):
        p = rng.uniform(0.01, 1.0, size=(6, 4))
        g = rng.uniform(0.01, 1.0, size=(6, 4))
        assert float(sim_loss(t64(p), t64(g)).data) == pytest.approx(
            float(sim_loss(t64(g), t64(p)).data), abs=1e-12
        )

    def test_gradient(self, rng, f64):
        p = t64(rng.uniform(0.1, 0.9, size=(4, 4)), requires_grad=True)
        g = t64(rng.uniform(0.1, 1.0, size=(4, 4)))
        report = finite_difference_check(lambda: sim_loss(p, g), [("p", p)], rng=rng)
        assert report.max_rel_error < 1e-3


class TestCompositeVSPLoss:
    def test_identity_case_is_zero(self, rng):
        g = rng.uniform(0.1, 1.0, size=(6, 6))
        total, parts = vsp_loss(t64(g), t64(g))
        assert parts["cc"] == pytest.approx(-1.0, abs=1e-6)
        assert parts["sim"] == pytest.approx(1.0, abs=1e-6)
        assert float(total.data) == pytest.approx(0.0, abs=1e-5)

    def test_zero_weights_reduce_to_kl(self, rng):
        p = rng.uniform(0.1, 0.9, size=(5, 5))
        g = rng.uniform(0.1, 1.0, size=(5, 5))
        total, _ = vsp_loss(t64(p), t64(g), LossWeights(0.0, 0.0))
        assert float(total.data) == pytest.approx(float(kl_loss(t64(p), t64(g)).data), abs=1e-12)

    def test_composite_gradient(self, rng, f64):
        p = t64(rng.uniform(0.1, 0.9, size=(5, 5)), requires_grad=True)
        g = t64(rng.uniform(0.1, 1.0, size=(5, 5)))
        report = finite_difference_check(lambda: vsp_loss(p, g)[0], [("p", p)], rng=rng)
        assert report.max_rel_error < 1e-3


class TestVSODBce:
    def test_perfect_prediction_near_zero(self):
        g = np.array([[0.0, 1.0], [1.0, 0.0]])
        p = np.where(g > 0.5, 1.0 - 1e-7, 1e-7)
        assert float(vsod_bce(t64(p), t64(g)).data) == pytest.approx(0.0, abs=1e-5)

    def test_half_everywhere_is_ln2(self, rng):
        g = (rng.uniform(size=(3, 4, 4)) > 0.5).astype(np.float64)
        value = float(vsod_bce(t64(np.full((3, 4, 4), 0.5)), t64(g)).data)
        assert value == pytest.approx(np.log(2.0), abs=1e-6)

    def test_against_scalar_loop_oracle(self, rng):
        p = rng.uniform(0.05, 0.95, size=(2, 3, 3))
        g = (rng.uniform(size=(2, 3, 3)) > 0.5).astype(np.float64)
        total = 0.0
        for idx in np.ndindex(p.shape):
            total += g[idx] * np.log(p[idx]) + (1 - g[idx]) * np.log(1 - p[idx])
        expected = -total / p.size
        assert float(vsod_bce(t64(p), t64(g)).data) == pytest.approx(expected, abs=1e-6)

    def test_gradient(self, rng, f64):
        p = t64(rng.uniform(0.1, 0.9, size=(2, 4, 4)), requires_grad=True)
        g = t64((rng.uniform(size=(2, 4, 4)) > 0.5).astype(np.float64))
        report = finite_difference_check(lambda: vsod_bce(p, g), [("p", p)], rng=rng)
        assert report.max_rel_error < 1e-3


class TestInvariants:
    def test_ranges_on_random_pairs(self, rng):
        for _ in range(25):
            p = rng.uniform(0.01, 1.0, size=(5, 5))
            g = rng.uniform(0.01, 1.0, size=(5, 5))
            assert float(kl_loss(t64(p), t64(g)).data) >= -1e-9
            assert -1.0 - 1e-9 <= float(cc_loss(t64(p), t64(g)).data) <= 1.0 + 1e-9
            assert -1e-9 <= float(sim_loss(t64(p), t64(g)).data) <= 1.0 + 1e-9
            binary = (rng.uniform(size=(5, 5)) > 0.5).astype(np.float64)
            assert float(vsod_bce(t64(p), t64(binary)).data) >= 0.0
