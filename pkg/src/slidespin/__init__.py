"""Specimen-level inference on whole-slide images.

The pipeline: open a pyramidal slide, segment tissue on a thumbnail, plan a
patch grid over tissue, embed patches with an encoder, and pool the
embeddings with attention into a slide-level prediction.
"""

from .engine import RunReport, compute_metrics, export_geojson, run_inference
from .errors import SlideSpinError
from .patching import PatchPlan, PatchSpec, plan_patches
from .slide_io import SlidePyramid, open_slide
from .tissue import TissueMask, detect_tissue
from .zoo import ModelRef, resolve_model, verify_bundle

__version__ = "0.1.0"

__all__ = [
    "ModelRef",
    "PatchPlan",
    "PatchSpec",
    "RunReport",
    "SlidePyramid",
    "SlideSpinError",
    "TissueMask",
    "compute_metrics",
    "detect_tissue",
    "export_geojson",
    "open_slide",
    "plan_patches",
    "resolve_model",
    "run_inference",
    "verify_bundle",
    "__version__",
]
