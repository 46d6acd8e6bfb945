import math

import numpy as np
import pytest

from carimorph.errors import BatchError, UndefinedIdentityError
from carimorph.losses import (
    LossWeights,
    adv_loss_discriminator,
    adv_loss_generator,
    caricature_loss,
    caricature_loss_batch,
    character_loss,
    character_loss_batch,
    perceptual_gradient,
    total_loss,
)


class TestAdversarialLoss:
    def test_discriminator_optimum(self):
        assert adv_loss_discriminator([0.0, 0.0], [1.0, 1.0]) == 0.0

    def test_discriminator_worst_case(self):
        assert adv_loss_discriminator([1.0], [0.0]) == 2.0

    def test_discriminator_midpoint(self):
        assert adv_loss_discriminator([0.5], [0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_generator_values(self):
        assert adv_loss_generator([1.0, 1.0]) == 0.0
        assert adv_loss_generator([0.0]) == 1.0
        assert adv_loss_generator([0.5, 1.5]) == pytest.approx(0.25, abs=1e-15)

    def test_empty_batch_rejected(self):
        with pytest.raises(BatchError):
            adv_loss_generator([])
        with pytest.raises(BatchError):
            adv_loss_discriminator([], [1.0])


class TestCharacterLoss:
    def test_identical_features(self, rng):
        v = rng.standard_normal(12)
        assert character_loss(v, v) == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal_features(self):
        assert character_loss([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)

    def test_opposed_features(self, rng):
        v = rng.standard_normal(12)
        assert character_loss(v, -v) == pytest.approx(2.0, abs=1e-14)

    def test_scale_invariance(self, rng):
        g = rng.standard_normal(12)
        p = rng.standard_normal(12)
        reference = character_loss(g, p)
        for a in (0.1, 1.0, 10.0):
            for b in (0.1, 1.0, 10.0):
                assert character_loss(a * g, b * p) == pytest.approx(reference, abs=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(UndefinedIdentityError):
            character_loss(np.zeros(3), np.ones(3))

    def test_batch_averages(self, rng):
        g = rng.standard_normal((5, 12))
        p = rng.standard_normal((5, 12))
        expected = np.mean([character_loss(g[i], p[i]) for i in range(5)])
        assert character_loss_batch(g, p) == pytest.approx(expected, abs=1e-14)


class TestCaricatureLoss:
    def test_equal_features(self, rng):
        v = rng.standard_normal(12)
        assert caricature_loss(v, v) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_double_magnitude(self, rng):
        v = rng.standard_normal(12)
        assert caricature_loss(2.0 * v, v) == pytest.approx(math.exp(-2.0), abs=1e-12)

    def test_orthogonal_features(self):
        assert caricature_loss([1.0, 0.0], [0.0, 2.0]) == pytest.approx(1.0, abs=1e-15)

    def test_monotone_in_magnitude_when_aligned(self, rng):
        p = rng.standard_normal(12)
        g = p + 0.05 * rng.standard_normal(12)
        values = [caricature_loss(t * g, p) for t in (0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_monotone_increasing_when_opposed(self, rng):
        p = rng.standard_normal(12)
        g = -p + 0.05 * rng.standard_normal(12)
        values = [caricature_loss(t * g, p) for t in (0.5, 1.0, 2.0)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_positive_and_finite(self, rng):
        for _ in range(50):
            g = rng.standard_normal(8)
            p = rng.standard_normal(8)
            value = caricature_loss(g, p)
            assert value > 0.0 and np.isfinite(value)
            assert 0.0 <= character_loss(g, p) <= 2.0

    def test_batch_averages(self, rng):
        g = rng.standard_normal((4, 6))
        p = rng.standard_normal((4, 6))
        expected = np.mean([caricature_loss(g[i], p[i]) for i in range(4)])
        assert caricature_loss_batch(g, p) == pytest.approx(expected, abs=1e-14)


class TestTotalLoss:
    def test_zero(self):
        assert total_loss(0.0, 0.0, 0.0, LossWeights()) == 0.0

    def test_reference_composition(self):
        # adv 0.5, cari e^-1, default weights 2 and 20.
        value = total_loss(0.5, 0.0, math.exp(-1.0), LossWeights())
        assert value == pytest.approx(0.5 + 20.0 * math.exp(-1.0), abs=1e-12)
        assert value == pytest.approx(7.8575888, abs=1e-6)

    def test_adv_only_configuration(self):
        weights = LossWeights(0.0, 0.0)
        assert total_loss(0.7, 5.0, 9.0, weights) == pytest.approx(0.7, abs=1e-15)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(-1.0, 0.0)


def finite_difference_gradient(g, p, weights, h=1e-6):
    grad = np.zeros_like(g)
    for i in range(g.size):
        up = g.copy()
        up[i] += h
        down = g.copy()
        down[i] -= h
        f_up = weights.lambda_cha * character_loss(up, p) + weights.lambda_cari * caricature_loss(up, p)
        f_down = weights.lambda_cha * character_loss(down, p) + weights.lambda_cari * caricature_loss(down, p)
        grad[i] = (f_up - f_down) / (2 * h)
    return grad


class TestPerceptualGradient:
    def test_stationary_along_ray_at_identity(self, rng):
        p = rng.standard_normal(12)
        grad = perceptual_gradient(p, p, LossWeights(1.0, 0.0))
        assert abs(grad @ p) < 1e-10
        assert np.abs(grad).max() < 1e-10  # 1 - cos is flat at its minimum

    def test_matches_finite_differences(self, rng):
        # Oracle: central differences at the default weights.
        weights = LossWeights(2.0, 20.0)
        for _ in range(100):
            g = rng.standard_normal(12)
            p = rng.standard_normal(12)
            analytic = perceptual_gradient(g, p, weights)
            numeric = finite_difference_gradient(g, p, weights)
            scale = max(np.abs(numeric).max(), 1e-12)
            assert np.abs(analytic - numeric).max() / scale < 1e-5

    def test_orthogonal_directional_derivative(self, rng):
        # At g _|_ p the caricature term's derivative along p is -|p|^-2 * |p|^2... = -1
        # in the normalized sense: d/dt exp(-( (g + t p) . p)/|p|^2) at t=0 = -1.
        p = np.zeros(4)
        p[0] = 2.0
        g = np.zeros(4)
        g[1] = 3.0
        weights = LossWeights(0.0, 1.0)
        analytic = perceptual_gradient(g, p, weights)
        h = 1e-7
        numeric = (caricature_loss(g + h * p, p) - caricature_loss(g - h * p, p)) / (2 * h)
        assert analytic @ p == pytest.approx(numeric, rel=1e-6)
        assert analytic @ p == pytest.approx(-1.0, rel=1e-9)

    def test_zero_norm_rejected(self):
        with pytest.raises(UndefinedIdentityError):
            perceptual_gradient(np.zeros(3), np.ones(3), LossWeights())
