import math

import numpy as np
import pytest

from pglr.errors import InvalidInputError
from pglr.metrics import evaluate, mse, psnr, ssim


def textured(n=32, seed=0):
    rng = np.random.default_rng(seed)
    base = np.add.outer(np.linspace(0, 200, n), np.linspace(0, 55, n))
    return base + rng.uniform(0, 30, size=(n, n))


class TestMse:
    def test_identical_is_zero(self):
        img = textured()
        assert mse(img, img) == 0.0

    def test_constant_offset(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 5.0)
        assert mse(a, b) == 25.0

    def test_hand_computed(self):
        a = np.array([[0.0], [0.0]])
        b = np.array([[3.0], [4.0]])
        assert mse(a, b) == 12.5

    def test_rejects_dim_mismatch(self):
        with pytest.raises(InvalidInputError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))


class TestPsnr:
    def test_full_scale_error_is_zero_db(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 255.0)
        assert abs(psnr(a, b)) < 1e-12

    def test_identical_hits_cap(self):
        img = textured()
        assert psnr(img, img) == 100.0

    def test_sigma25_expectation(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 25.0)
        assert abs(psnr(a, b) - 10.0 * math.log10(65025.0 / 625.0)) < 1e-12

    def test_consistent_with_mse_and_decreasing(self):
        rng = np.random.default_rng(1)
        pairs = []
        for _ in range(100):
            a = rng.uniform(0, 255, size=(12, 12))
            b = rng.uniform(0, 255, size=(12, 12))
            m = mse(a, b)
            p = psnr(a, b)
            assert abs(p - 10.0 * math.log10(65025.0 / m)) <= 1e-9
            pairs.append((m, p))
        pairs.sort()
        for (m1, p1), (m2, p2) in zip(pairs, pairs[1:]):
            if m2 > m1:
                assert p2 < p1


class TestSsim:
    def test_identical_is_exactly_one(self):
        for seed in range(5):
            img = textured(seed=seed)
            assert ssim(img, img) == 1.0

    def test_inverted_image_scores_low_and_symmetric(self):
        a = textured()
        b = 255.0 - a
        forward = ssim(a, b)
        assert forward < 0.5
        assert forward == ssim(b, a)

    def test_constant_images_closed_form(self):
        a = np.zeros((16, 16))
        b = np.full((16, 16), 255.0)
        c1 = (0.01 * 255.0) ** 2
        expect = c1 / (255.0 ** 2 + c1)
        assert abs(ssim(a, b) - expect) < 1e-12

    def test_dc_shift_detected(self):
        a = textured()
        assert ssim(a, a + 10.0) < 1.0

    def test_rejects_images_smaller_than_window(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((10, 12)), np.zeros((10, 12)))

    def test_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.uniform(0, 255, size=(14, 14))
            b = rng.uniform(0, 255, size=(14, 14))
            val = ssim(a, b)
            assert -1.0 <= val <= 1.0


class TestEvaluate:
    def test_report_fields_consistent(self):
        a = textured(seed=3)
        b = textured(seed=4)
        rep = evaluate(a, b)
        assert rep.mse == mse(a, b)
        assert rep.psnr == psnr(a, b)
        assert rep.ssim == ssim(a, b)
