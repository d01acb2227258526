"""Tissue detection on a slide thumbnail and tissue-fraction queries.

Tissue is darker-than-threshold on grayscale (H&E tissue against glass
background); the threshold comes from Otsu's criterion with ties broken
toward the smallest value so degenerate images are deterministic. The mask
lives at thumbnail scale and carries the transform back to level-0 pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyHistogramError
from .slide_io import RasterPatch, SlidePyramid

DEFAULT_THUMBNAIL_DIM = 2048


@dataclass
class TissueMask:
    """Binary tissue raster at thumbnail scale.

    scale_x/scale_y are level-0 pixels per mask pixel.
    """

    bits: np.ndarray  # (height, width) uint8, 1 = tissue
    scale_x: float
    scale_y: float
    threshold_used: int

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def tissue_pixels(self) -> int:
        return int(self.bits.sum())


@dataclass
class GrayHistogram:
    counts: np.ndarray  # (256,) int64

    @classmethod
    def of(cls, gray: np.ndarray) -> "GrayHistogram":
        return cls(np.bincount(gray.ravel(), minlength=256).astype(np.int64))


def to_grayscale(patch: RasterPatch | np.ndarray) -> np.ndarray:
    """Rec.601 luma: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    arr = patch.data if isinstance(patch, RasterPatch) else np.asarray(patch)
    rgb = arr.astype(np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def otsu_threshold(hist: GrayHistogram) -> int:
    """Threshold maximizing between-class variance, smallest value on ties.

    The maximization is carried out in exact integer arithmetic: for a split
    at t the between-class variance is proportional to
    (s0*n1 - s1*n0)^2 / (n0*n1), so candidate splits compare by
    cross-multiplication without any floating-point rounding.
    """
    counts = [int(c) for c in hist.counts]
    if len(counts) != 256 or any(c < 0 for c in counts):
        raise ValueError("histogram must be 256 nonnegative counts")
    total = sum(counts)
    if total < 1:
        raise EmptyHistogramError("histogram has no pixels")
    s_total = sum(i * c for i, c in enumerate(counts))

    best_t = 0
    best_num, best_den = -1, 1  # any real variance (>= 0) beats the sentinel
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            num = (s0 * n1 - (s_total - s0) * n0) ** 2
            den = n0 * n1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t


def median_filter3(bits: np.ndarray) -> np.ndarray:
    """3x3 median on a binary raster; outside the raster counts as background."""
    return ndimage.median_filter(bits, size=3, mode="constant", cval=0)


def binary_closing3(bits: np.ndarray) -> np.ndarray:
    """Morphological closing with a 3x3 square structuring element."""
    structure = np.ones((3, 3), bool)
    closed = ndimage.binary_closing(bits.astype(bool), structure=structure, border_value=0)
    return closed.astype(np.uint8)


def detect_tissue(slide: SlidePyramid, max_dim: int = DEFAULT_THUMBNAIL_DIM) -> TissueMask:
    """Thumbnail -> grayscale -> Otsu -> binarize -> 3x3 median -> 3x3 closing."""
    thumb = slide.get_thumbnail(max_dim)
    gray = to_grayscale(thumb)
    t = otsu_threshold(GrayHistogram.of(gray))
    bits = (gray <= t).astype(np.uint8)
    bits = median_filter3(bits)
    bits = binary_closing3(bits)
    return TissueMask(
        bits=bits,
        scale_x=slide.width / bits.shape[1],
        scale_y=slide.height / bits.shape[0],
        threshold_used=t,
    )


def tissue_fraction(mask: TissueMask, rect: tuple[float, float, float, float]) -> float:
    """Fraction of mask pixels covering a level-0 rect that are tissue.

    The rect maps to mask pixels with floor/ceil so every overlapped pixel
    counts; a rect fully outside the mask yields 0.
    """
    x, y, w, h = rect
    if w <= 0 or h <= 0:
        raise ValueError("rect must have positive area")
    mx0 = max(math.floor(x / mask.scale_x), 0)
    my0 = max(math.floor(y / mask.scale_y), 0)
    mx1 = min(math.ceil((x + w) / mask.scale_x), mask.width)
    my1 = min(math.ceil((y + h) / mask.scale_y), mask.height)
    if mx0 >= mx1 or my0 >= my1:
        return 0.0
    return float(mask.bits[my0:my1, mx0:mx1].mean())
