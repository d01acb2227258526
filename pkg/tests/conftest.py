"""Shared fixture builders: synthetic slides and a deterministic demo bundle."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from slidespin.slide_io import write_directory_pyramid


def box_downsample(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    img = Image.fromarray(arr, mode="RGB")
    return np.asarray(img.resize((width, height), resample=Image.BOX))


def build_pyramid(level0: np.ndarray, dims: list[tuple[int, int]]) -> list[np.ndarray]:
    """level0 followed by box-downsampled levels at the given (w, h) sizes."""
    return [level0] + [box_downsample(level0, w, h) for w, h in dims]


def constant_rgb(width: int, height: int, value: int) -> np.ndarray:
    return np.full((height, width, 3), value, dtype=np.uint8)


def checkerboard_rgb(width: int, height: int, square: int = 8) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    cells = ((ys // square) + (xs // square)) % 2
    return (cells[:, :, None] * 255).astype(np.uint8).repeat(3, axis=2)


def blob_rgb(
    width: int,
    height: int,
    blob_xywh: tuple[int, int, int, int],
    blob_value: int = 60,
    background: int = 255,
) -> np.ndarray:
    arr = constant_rgb(width, height, background)
    x, y, w, h = blob_xywh
    arr[y : y + h, x : x + w] = blob_value
    return arr


@pytest.fixture
def blob_slide_dir(tmp_path):
    """2048x2048 white slide with a 1200x1200 dark blob at (400, 400), 2 levels."""
    level0 = blob_rgb(2048, 2048, (400, 400, 1200, 1200))
    levels = build_pyramid(level0, [(1024, 1024)])
    return write_directory_pyramid(tmp_path / "blob_slide", levels, tile=256, mpp=None)


@pytest.fixture
def white_slide_dir(tmp_path):
    """All-white 512x512 single-level slide (no tissue)."""
    return write_directory_pyramid(
        tmp_path / "white_slide", [constant_rgb(512, 512, 255)], tile=256
    )
