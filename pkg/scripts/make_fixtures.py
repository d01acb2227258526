#!/usr/bin/env python3
"""Populate a workspace with the demo model bundle and synthetic slides.

Creates the layout the CLI and the HTTP service expect:

    <root>/models/reference-demo/   checksummed bundle (band-mean encoder)
    <root>/slides/blob/             2048x2048, one dark 1200-px blob
    <root>/slides/blank/            1024x1024, pure white (no tissue)
    <root>/slides/quadrant/         512x512, four gray quadrants

Typical use:

    python3 scripts/make_fixtures.py /tmp/demo
    python3 -m slidespin.cli serve --models /tmp/demo/models --slides /tmp/demo/slides
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from slidespin.demo import (  # noqa: E402
    DEMO_MODEL_NAME,
    make_blank_slide,
    make_blob_slide,
    make_demo_bundle,
    make_quadrant_slide,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("root", type=Path, help="directory to populate")
    parser.add_argument(
        "--blob-size", type=int, default=2048, help="side of the blob slide in pixels"
    )
    args = parser.parse_args()

    bundle = make_demo_bundle(args.root / "models" / DEMO_MODEL_NAME)
    slides = [
        make_blob_slide(args.root / "slides" / "blob", size=args.blob_size),
        make_blank_slide(args.root / "slides" / "blank"),
        make_quadrant_slide(args.root / "slides" / "quadrant"),
    ]
    print(f"bundle: {bundle}")
    for slide in slides:
        print(f"slide:  {slide}")


if __name__ == "__main__":
    main()
