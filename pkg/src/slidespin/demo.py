"""Self-contained demo assets: a weight-free model bundle and synthetic slides.

The demo bundle uses the built-in reference encoder, so it needs no
downloads and runs anywhere.  Its handcrafted aggregator scores the mean
darkness of each patch: band features of dark tissue sit well below 0.5, so
slides whose tissue patches are dark land in the "positive" class.  The
synthetic slides pair with it — a dark blob on a white background
("positive") and an all-white slide (no tissue at all).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .slide_io import write_directory_pyramid

__all__ = [
    "DEMO_MODEL_NAME",
    "demo_weights_doc",
    "demo_manifest_doc",
    "make_demo_bundle",
    "make_blob_slide",
    "make_blank_slide",
    "make_quadrant_slide",
]

DEMO_MODEL_NAME = "reference-demo"
DEMO_DIM = 4
DEMO_PATCH_SIZE = 256


def demo_weights_doc(dim: int = DEMO_DIM) -> dict:
    """Aggregator weights that fire "positive" when mean band darkness > 0.5.

    With V = I and w = 1, attention is a softmax over sum(tanh(h_k)) — darker
    patches (smaller features) get slightly less attention but the head
    decides on the pooled feature sum: class 1 wins when sum(z) < dim/2.
    """
    return {
        "dims": {"D": dim, "L": dim, "C": 2},
        "attention": "tanh",
        "class_names": ["negative", "positive"],
        "V": np.eye(dim).tolist(),
        "w": [1.0] * dim,
        "W_out": [[1.0] * dim, [-1.0] * dim],
        "b_out": [-dim / 2, dim / 2],
    }


def demo_manifest_doc(
    aggregator_sha256: str,
    dim: int = DEMO_DIM,
    patch_size: int = DEMO_PATCH_SIZE,
) -> dict:
    return {
        "schema_version": 1,
        "model_name": DEMO_MODEL_NAME,
        "description": "Weight-free demo model: classifies mean patch darkness.",
        "encoder": {
            "encoder_id": "reference-v1",
            "embed_dim": dim,
            "input_size": patch_size,
        },
        "patch": {"patch_size_px": patch_size, "tissue_threshold": 0.5},
        "class_names": ["negative", "positive"],
        "files": {
            "aggregator": {"path": "aggregator.json", "sha256": aggregator_sha256}
        },
    }


def make_demo_bundle(
    dest: str | Path,
    dim: int = DEMO_DIM,
    patch_size: int = DEMO_PATCH_SIZE,
) -> Path:
    """Write a complete, verifiable demo bundle into ``dest``."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    weights = json.dumps(demo_weights_doc(dim), indent=2).encode("utf-8")
    (dest / "aggregator.json").write_bytes(weights)
    digest = hashlib.sha256(weights).hexdigest()
    manifest = demo_manifest_doc(digest, dim=dim, patch_size=patch_size)
    (dest / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return dest


def _blank(width: int, height: int, value: int = 255) -> np.ndarray:
    return np.full((height, width, 3), value, np.uint8)


def _with_levels(level0: np.ndarray) -> list[np.ndarray]:
    """level0 plus one 2x box-downsampled level (dims divisible by 2 assumed)."""
    h, w = level0.shape[:2]
    half = (
        level0.reshape(h // 2, 2, w // 2, 2, 3)
        .mean(axis=(1, 3))
        .round()
        .astype(np.uint8)
    )
    return [level0, half]


def make_blob_slide(dest: str | Path, size: int = 2048) -> Path:
    """White slide with a centered dark 1200x1200 blob: plenty of dark tissue."""
    level0 = _blank(size, size)
    lo = (size - 1200) // 2
    level0[lo : lo + 1200, lo : lo + 1200] = 60
    return write_directory_pyramid(Path(dest), _with_levels(level0))


def make_blank_slide(dest: str | Path, size: int = 1024) -> Path:
    """All-white slide: tissue detection finds nothing."""
    return write_directory_pyramid(Path(dest), _with_levels(_blank(size, size)))


def make_quadrant_slide(dest: str | Path, patch: int = DEMO_PATCH_SIZE) -> Path:
    """2x2-patch slide whose quadrants have distinct gray levels.

    Exactly four full patches fit; the graded darkness makes attention and
    per-patch features distinguishable, which pins down export layouts.
    """
    size = 2 * patch
    level0 = _blank(size, size)
    level0[:patch, :patch] = 40
    level0[:patch, patch:] = 60
    level0[patch:, :patch] = 80
    level0[patch:, patch:] = 100
    return write_directory_pyramid(Path(dest), _with_levels(level0))
