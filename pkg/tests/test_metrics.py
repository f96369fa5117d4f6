import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitshield.errors import ShapeError
from splitshield.metrics import (PSNR_INFINITE, ImagePair, SimilarityReport,
                                 compare, mse, psnr, ssim)

from oracles import loop_mse, loop_psnr, loop_ssim

C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2


class TestMse:
    def test_identical_images(self, rng):
        a = rng.uniform(0, 255, size=(8, 8))
        assert mse(ImagePair(a, a)) == 0.0

    def test_full_scale_difference(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 255.0)
        assert mse(ImagePair(a, b)) == 65025.0

    def test_matches_loop_oracle(self, rng):
        for _ in range(10):
            a = rng.uniform(0, 255, size=(3, 8, 8))
            b = rng.uniform(0, 255, size=(3, 8, 8))
            assert mse(ImagePair(a, b)) == pytest.approx(loop_mse(a, b), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ImagePair(np.zeros((2, 2)), np.zeros((3, 3)))


class TestSsim:
    def test_identical_images_score_one_exactly(self, rng):
        a = rng.uniform(0, 255, size=(3, 8, 8))
        assert ssim(ImagePair(a, a)) == 1.0

    def test_constant_black_vs_white_closed_form(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 255.0)
        expected = (C1 * C2) / ((65025.0 + C1) * C2)
        assert ssim(ImagePair(a, b)) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(1.0001e-4, rel=1e-3)

    def test_constant_shift_affects_luminance_only(self, rng):
        a = rng.uniform(10, 200, size=(8, 8))
        shift = 30.0
        b = a + shift
        mu = a.mean()
        var = a.var()
        expected = ((2 * mu * (mu + shift) + C1) * (2 * var + C2)
                    / ((mu ** 2 + (mu + shift) ** 2 + C1) * (2 * var + C2)))
        assert ssim(ImagePair(a, b)) == pytest.approx(expected, rel=1e-12)
        assert ssim(ImagePair(a, b)) < 1.0

    def test_matches_loop_oracle(self, rng):
        for _ in range(5):
            a = rng.uniform(0, 255, size=(2, 8, 8))
            b = rng.uniform(0, 255, size=(2, 8, 8))
            assert ssim(ImagePair(a, b)) == pytest.approx(loop_ssim(a, b, C1, C2),
                                                          rel=1e-9)

    @settings(max_examples=100, derandomize=True, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_range_and_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-10, 265, size=(4, 4))
        b = rng.uniform(-10, 265, size=(4, 4))
        s = ssim(ImagePair(a, b))
        assert -1.0 <= s <= 1.0
        assert s == pytest.approx(ssim(ImagePair(b, a)), abs=1e-12)

    def test_one_iff_equal(self, rng):
        a = rng.uniform(0, 255, size=(6, 6))
        b = a.copy()
        b[0, 0] += 1.0
        assert ssim(ImagePair(a, a)) == pytest.approx(1.0, abs=1e-12)
        assert ssim(ImagePair(a, b)) < 1.0 - 1e-12


class TestPsnr:
    def test_full_scale_error_is_zero_db(self):
        pair = ImagePair(np.zeros((8, 8)), np.full((8, 8), 255.0))
        assert psnr(pair) == 0.0

    def test_twenty_db(self):
        # any pair with MSE = 650.25 sits exactly at 20 dB
        a = np.zeros((4, 4))
        b = np.full((4, 4), math.sqrt(650.25))
        assert psnr(ImagePair(a, b)) == pytest.approx(20.0, abs=1e-9)

    def test_identical_images_hit_the_infinite_sentinel(self, rng):
        a = rng.uniform(0, 255, size=(8, 8))
        assert psnr(ImagePair(a, a)) is PSNR_INFINITE

    def test_matches_loop_oracle(self, rng):
        for _ in range(10):
            a = rng.uniform(0, 255, size=(8, 8))
            b = rng.uniform(0, 255, size=(8, 8))
            assert psnr(ImagePair(a, b)) == pytest.approx(loop_psnr(a, b), abs=1e-9)

    def test_duality_with_mse(self, rng):
        a = np.zeros((8, 8))
        values = [psnr(ImagePair(a, np.full((8, 8), lvl))) for lvl in (10, 40, 160)]
        assert values[0] > values[1] > values[2]


class TestConventions:
    def test_unit_range_inputs_are_rescaled(self, rng):
        a = rng.uniform(0, 1, size=(3, 4, 4))
        b = rng.uniform(0, 1, size=(3, 4, 4))
        unit = compare(a, b, peak=1.0)
        eight_bit = compare(a * 255.0, b * 255.0, peak=255.0)
        assert unit.mse == pytest.approx(eight_bit.mse, rel=1e-12)
        assert unit.ssim == pytest.approx(eight_bit.ssim, rel=1e-12)
        assert unit.psnr_db == pytest.approx(eight_bit.psnr_db, rel=1e-12)

    def test_report_invariant(self):
        with pytest.raises(ValueError):
            SimilarityReport(mse=0.0, ssim=1.0, psnr_db=12.0)
        with pytest.raises(ValueError):
            SimilarityReport(mse=5.0, ssim=1.0, psnr_db=math.inf)
        report = compare(np.zeros((2, 2)), np.zeros((2, 2)))
        assert report.mse == 0.0 and math.isinf(report.psnr_db)

    def test_mse_symmetry(self, rng):
        a = rng.uniform(0, 255, size=(5, 5))
        b = rng.uniform(0, 255, size=(5, 5))
        assert mse(ImagePair(a, b)) == mse(ImagePair(b, a))
