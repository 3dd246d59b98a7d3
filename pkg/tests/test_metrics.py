import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omharmony.errors import DimensionMismatch, MissingBackend
from omharmony.imagecore import ColorSpace, ImageBuf
from omharmony.metrics import (
    CriticScores,
    LossWeights,
    charbonnier,
    mse,
    perceptual_distance,
    psnr,
    register_backend,
    rel_d_loss,
    rel_g_loss,
    ssim,
    total_loss,
)


def gray(level: float, size: int = 16) -> ImageBuf:
    return ImageBuf(np.full((3, size, size), level / 255.0, np.float32), ColorSpace.SRGB_01)


class TestMsePsnr:
    def test_identical(self, small_source):
        assert mse(small_source.image, small_source.image) == 0.0
        assert psnr(small_source.image, small_source.image) == math.inf

    def test_uniform_offset_sixteen(self):
        # mse 256 and psnr 10*log10(255^2/256) ~= 24.048 dB
        a = np.full((8, 8), 100.0)
        b = np.full((8, 8), 116.0)
        assert mse(a, b) == pytest.approx(256.0)
        assert psnr(a, b) == pytest.approx(24.0484, abs=1e-3)

    def test_checkerboard_max_error(self):
        a = np.zeros((4, 4))
        a[::2, 1::2] = 255.0
        a[1::2, ::2] = 255.0
        b = 255.0 - a
        assert mse(a, b) == pytest.approx(65025.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mse(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_symmetric_and_monotone(self, rng):
        a = rng.uniform(0, 255, (10, 10))
        b = rng.uniform(0, 255, (10, 10))
        assert mse(a, b) == mse(b, a)
        errs = [mse(a, a + d) for d in (1.0, 4.0, 9.0, 30.0)]
        ps = [psnr(a, a + d) for d in (1.0, 4.0, 9.0, 30.0)]
        assert all(x < y for x, y in zip(errs, errs[1:]))
        assert all(x > y for x, y in zip(ps, ps[1:]))


class TestSsim:
    def test_self_similarity_exact(self, small_source):
        assert ssim(small_source.image, small_source.image) == 1.0

    def test_constant_offset_one(self):
        assert ssim(gray(128.0), gray(129.0)) > 0.99

    def test_inverted_image_low(self, rng):
        a = rng.uniform(0, 255, (64, 64))
        assert ssim(a, 255.0 - a) < 0.3

    def test_matches_reference_implementation(self, rng):
        skmetrics = pytest.importorskip("skimage.metrics")
        a = rng.uniform(0, 255, (48, 48))
        b = np.clip(a + rng.normal(0, 12, (48, 48)), 0, 255)
        ref = skmetrics.structural_similarity(
            a, b, win_size=11, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False, data_range=255.0,
        )
        assert ssim(a, b) == pytest.approx(ref, abs=1e-6)

    def test_bounded(self, rng):
        a = rng.uniform(0, 255, (32, 32))
        b = rng.uniform(0, 255, (32, 32))
        assert -1.0 <= ssim(a, b) <= 1.0

    def test_too_small_rejected(self):
        with pytest.raises(DimensionMismatch):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestCharbonnier:
    def test_identical_inputs_give_eps_exactly(self):
        a = np.full((64, 64), 0.37)
        assert charbonnier(a, a, 0.5) == 0.5
        assert charbonnier(a, a, 2.0 ** -10) == 2.0 ** -10

    def test_three_four_five(self):
        a = np.zeros((4, 4))
        assert charbonnier(a, a + 3.0, 4.0) == pytest.approx(5.0)

    def test_eps_validated(self):
        with pytest.raises(ValueError):
            charbonnier(np.zeros(3), np.zeros(3), 0.0)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_upper_bounds_l1(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-5, 5, (6, 6))
        b = rng.uniform(-5, 5, (6, 6))
        eps = float(rng.uniform(1e-6, 2.0))
        assert charbonnier(a, b, eps) >= np.mean(np.abs(a - b)) - 1e-12

    def test_l1_limit(self, rng):
        a = rng.uniform(0, 1, (16, 16))
        b = rng.uniform(0, 1, (16, 16))
        l1 = float(np.mean(np.abs(a - b)))
        assert charbonnier(a, b, 1e-6) == pytest.approx(l1, abs=1e-5)


class TestAdversarial:
    def test_indifference_point(self):
        s = CriticScores(np.full(7, 1.3), np.full(7, 1.3))
        assert rel_d_loss(s) == pytest.approx(2 * math.log(2), abs=1e-12)
        assert rel_g_loss(s) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_confident_critic_near_zero_loss(self):
        s = CriticScores(np.array([20.0]), np.array([-20.0]))
        assert rel_d_loss(s) == pytest.approx(0.0, abs=1e-8)

    def test_role_swap_symmetry(self, rng):
        real = rng.normal(0, 2, 9)
        fake = rng.normal(-1, 2, 9)
        swapped = CriticScores(fake, real)
        assert rel_d_loss(CriticScores(real, fake)) == pytest.approx(rel_g_loss(swapped), rel=1e-12)

    def test_nonnegative(self, rng):
        for _ in range(20):
            s = CriticScores(rng.normal(0, 3, 5), rng.normal(0, 3, 5))
            assert rel_d_loss(s) >= 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            CriticScores(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError):
            CriticScores(np.array([np.nan]), np.array([0.0]))


class TestTotalLoss:
    def test_unit_char(self):
        assert total_loss(1.0, 0.0, 0.0) == 1.0

    def test_all_zero(self):
        assert total_loss(0.0, 0.0, 0.0) == 0.0

    def test_default_weights(self):
        assert total_loss(2.0, 3.0, 100.0) == pytest.approx(5.5)

    def test_custom_weights(self):
        assert total_loss(1.0, 1.0, 1.0, LossWeights(2.0, 0.5, 0.1)) == pytest.approx(2.6)


class TestPerceptual:
    def test_identical_is_zero(self, small_source):
        assert perceptual_distance(small_source.image, small_source.image) == 0.0

    def test_uniform_offset(self):
        # 16-level luma offset on the trivial backend: 16/255
        assert perceptual_distance(gray(100.0), gray(116.0)) == pytest.approx(16 / 255, abs=1e-6)

    def test_missing_backend(self, small_source):
        with pytest.raises(MissingBackend):
            perceptual_distance(small_source.image, small_source.image, backend="vgg")

    def test_custom_backend_registry(self, small_source):
        register_backend("always-seven", lambda a, b: 7.0)
        assert perceptual_distance(small_source.image, small_source.image, "always-seven") == 7.0
