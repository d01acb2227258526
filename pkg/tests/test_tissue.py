"""Tissue mask tests: grayscale, Otsu against an exact oracle, mask pipeline."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from slidespin.errors import EmptyHistogramError
from slidespin.slide_io import RasterPatch, open_slide, write_directory_pyramid
from slidespin.tissue import (
    GrayHistogram,
    TissueMask,
    binary_closing3,
    detect_tissue,
    median_filter3,
    otsu_threshold,
    tissue_fraction,
    to_grayscale,
)

from conftest import blob_rgb, constant_rgb


def otsu_oracle(counts: list[int]) -> int:
    """Exhaustive maximization of w0*w1*(mu0-mu1)^2 in exact rationals."""
    total = sum(counts)
    s_all = sum(i * c for i, c in enumerate(counts))
    best_t, best_v = 0, Fraction(-1)
    n0 = s0 = 0
    for t in range(256):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            v = Fraction(0)
        else:
            w0 = Fraction(n0, total)
            w1 = Fraction(n1, total)
            mu0 = Fraction(s0, n0)
            mu1 = Fraction(s_all - s0, n1)
            v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_v, best_t = v, t
    return best_t


class TestGrayscale:
    def test_white(self):
        patch = RasterPatch(constant_rgb(4, 4, 255))
        assert (to_grayscale(patch) == 255).all()

    def test_pure_red(self):
        arr = np.zeros((2, 2, 3), np.uint8)
        arr[..., 0] = 255
        assert (to_grayscale(arr) == 76).all()  # round(0.299 * 255)

    def test_mixed_value(self):
        arr = np.array([[[10, 20, 30]]], np.uint8)
        # round(2.99 + 11.74 + 3.42) = round(18.15) = 18
        assert to_grayscale(arr)[0, 0] == 18


class TestOtsu:
    def test_bimodal_tie_picks_smallest(self):
        counts = np.zeros(256, np.int64)
        counts[10] = 100
        counts[200] = 100
        assert otsu_threshold(GrayHistogram(counts)) == 10

    def test_constant_histogram(self):
        for v in (0, 17, 255):
            counts = np.zeros(256, np.int64)
            counts[v] = 1000
            assert otsu_threshold(GrayHistogram(counts)) == 0

    def test_empty_histogram(self):
        with pytest.raises(EmptyHistogramError):
            otsu_threshold(GrayHistogram(np.zeros(256, np.int64)))

    def test_seeded_random_histograms_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            counts = rng.integers(0, 1000, 256)
            got = otsu_threshold(GrayHistogram(counts.astype(np.int64)))
            assert got == otsu_oracle([int(c) for c in counts])

    @given(
        st.dictionaries(
            st.integers(0, 255), st.integers(1, 100_000), min_size=1, max_size=8
        )
    )
    def test_sparse_histograms_match_oracle(self, bins):
        counts = [0] * 256
        for value, count in bins.items():
            counts[value] = count
        hist = GrayHistogram(np.array(counts, np.int64))
        assert otsu_threshold(hist) == otsu_oracle(counts)


class TestDetectTissue:
    def test_blob_area(self, tmp_path):
        level0 = blob_rgb(4096, 4096, (1000, 1000, 1000, 1000))
        root = write_directory_pyramid(tmp_path / "blob", [level0])
        with open_slide(root) as slide:
            mask = detect_tissue(slide, max_dim=2048)
        # blob scales to 500x500 at mask resolution
        expected = 500 * 500
        assert abs(mask.tissue_pixels() - expected) <= 0.05 * expected
        assert mask.scale_x == pytest.approx(2.0)

    def test_all_white(self, white_slide_dir):
        with open_slide(white_slide_dir) as slide:
            mask = detect_tissue(slide)
        assert mask.threshold_used == 0
        assert mask.tissue_pixels() / (mask.width * mask.height) <= 0.01

    def test_specks_removed(self, tmp_path):
        level0 = blob_rgb(2048, 2048, (200, 200, 600, 600))
        specks = [(1500, 300), (1600, 800), (1800, 1500)]
        for x, y in specks:
            level0[y, x] = 60
        root = write_directory_pyramid(tmp_path / "specks", [level0])
        with open_slide(root) as slide:
            mask = detect_tissue(slide, max_dim=2048)
        # thumbnail is pixel-exact here, so speck coords carry over
        for x, y in specks:
            assert mask.bits[y, x] == 0
        assert mask.bits[400, 400] == 1  # blob interior survives

    def test_deterministic(self, blob_slide_dir):
        with open_slide(blob_slide_dir) as slide:
            a = detect_tissue(slide)
            b = detect_tissue(slide)
        assert a.threshold_used == b.threshold_used
        np.testing.assert_array_equal(a.bits, b.bits)

    def test_morphology_preserves_shape(self):
        rng = np.random.default_rng(0)
        bits = (rng.random((37, 53)) > 0.5).astype(np.uint8)
        assert median_filter3(bits).shape == bits.shape
        assert binary_closing3(bits).shape == bits.shape


def _mask(bits: np.ndarray, scale: float = 1.0) -> TissueMask:
    return TissueMask(bits=bits, scale_x=scale, scale_y=scale, threshold_used=0)


class TestTissueFraction:
    def test_all_tissue(self):
        mask = _mask(np.ones((100, 100), np.uint8))
        assert tissue_fraction(mask, (10, 10, 50, 50)) == 1.0

    def test_all_background(self):
        mask = _mask(np.zeros((100, 100), np.uint8))
        assert tissue_fraction(mask, (10, 10, 50, 50)) == 0.0

    def test_outside_mask(self):
        mask = _mask(np.ones((100, 100), np.uint8))
        assert tissue_fraction(mask, (500, 500, 10, 10)) == 0.0

    def test_straddling_boundary(self):
        bits = np.zeros((200, 200), np.uint8)
        bits[:, :100] = 1  # tissue left of x=100
        mask = _mask(bits)
        side = 100
        frac = tissue_fraction(mask, (50, 50, side, side))
        assert abs(frac - 0.5) <= 2 / side

    def test_scaled_mapping_covers_partial_pixels(self):
        bits = np.ones((4, 4), np.uint8)
        bits[:, 2:] = 0
        mask = _mask(bits, scale=10.0)  # level-0 is 40x40
        # rect (15..25) overlaps mask columns 1 and 2 -> one tissue, one not
        assert tissue_fraction(mask, (15, 0, 10, 10)) == 0.5

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50)
    def test_monotone_under_dilation(self, seed):
        rng = np.random.default_rng(seed)
        bits = (rng.random((32, 32)) > 0.7).astype(np.uint8)
        dilated = ndimage.binary_dilation(bits.astype(bool)).astype(np.uint8)
        x, y = rng.integers(0, 28, 2)
        w, h = rng.integers(1, 32, 2)
        rect = (float(x), float(y), float(w), float(h))
        assert tissue_fraction(_mask(dilated), rect) >= tissue_fraction(_mask(bits), rect)
