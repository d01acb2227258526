#!/usr/bin/env python3
"""Regenerate tests/data/golden_4patch.geojson.

The golden file freezes the GeoJSON export of the 4-quadrant fixture slide
(gray levels 40/60/80/100, one 256-px patch per quadrant, all-tissue mask)
run through the demo bundle.  Inspect the diff carefully before committing a
regenerated file: the attention values must match a by-hand evaluation of
softmax(4 * tanh(gray / 255)) and the coordinates must be the four quadrant
squares.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from slidespin.aggregator import forward  # noqa: E402
from slidespin.demo import make_demo_bundle, make_quadrant_slide  # noqa: E402
from slidespin.encoder import ReferenceEncoder, embed_batch  # noqa: E402
from slidespin.engine import RunReport, export_geojson  # noqa: E402
from slidespin.patching import PatchSpec, plan_patches  # noqa: E402
from slidespin.slide_io import open_slide  # noqa: E402
from slidespin.tissue import TissueMask  # noqa: E402
from slidespin.zoo import load_bundle  # noqa: E402


def main() -> None:
    out_path = REPO / "tests" / "data" / "golden_4patch.geojson"
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        bundle = make_demo_bundle(tmp / "bundle")
        slide_dir = make_quadrant_slide(tmp / "quadrant")
        manifest, weights = load_bundle(bundle)
        with open_slide(slide_dir) as slide:
            mask = TissueMask(np.ones((512, 512), np.uint8), 1.0, 1.0, 0)
            plan = plan_patches(slide, mask, PatchSpec(patch_size_px=256))
            matrix = embed_batch(ReferenceEncoder(manifest.encoder), plan, slide)
        result = forward(weights, matrix)
        report = RunReport(
            slide_path=str(slide_dir),
            model_name=manifest.model_name,
            result=result,
            n_patches=len(plan),
            durations_ms={},
            parameters={},
            timestamp="1970-01-01T00:00:00+00:00",
            plan=plan,
        )
        doc = export_geojson(plan, result, report)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_path}")
    print("attention:", [f["properties"]["attention"] for f in doc["features"]])
    print("probs:", doc["properties"]["probs"])
    print("predicted:", doc["properties"]["predicted_class"])


if __name__ == "__main__":
    main()
