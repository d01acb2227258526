"""Pipeline orchestration: slide in, specimen-level report and GeoJSON out.

``run_inference`` resolves a model bundle and drives the full pipeline —
open slide, detect tissue, plan patches, embed, aggregate — timing each
stage with a monotonic clock.  A slide with no usable tissue is not an
error: the report carries zero patches, uniform probabilities and the
"indeterminate" sentinel so batch runs never abort.  ``export_geojson``
turns a finished run into a FeatureCollection of per-patch squares with
attention scores, in level-0 pixel coordinates.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from shapely import contains_xy
from shapely.geometry import Polygon

from .aggregator import AggregatorWeights, InferenceResult, forward
from .encoder import DEFAULT_BATCH_SIZE, Encoder, embed_batch, load_encoder
from .errors import (
    EmptyInputError,
    InvalidPolygonError,
    LengthMismatchError,
    PipelineError,
    SlideSpinError,
)
from .patching import PatchPlan, PatchSpec, plan_patches
from .slide_io import open_slide
from .tissue import TissueMask, detect_tissue
from .zoo import ModelManifest, ModelRef, load_bundle, resolve_model

__all__ = [
    "INDETERMINATE",
    "RunReport",
    "Metrics",
    "run_inference",
    "run_pipeline",
    "compute_metrics",
    "export_geojson",
    "filter_plan_by_region",
    "report_to_dict",
]

INDETERMINATE = "indeterminate"

STAGES = ("open", "tissue", "plan", "embed", "aggregate")


@dataclass(frozen=True)
class RunReport:
    """Everything a single-slide run produced, including stage timings.

    ``plan`` holds the patch rectangles the run actually used (after any
    region filter) so GeoJSON export needs no replanning; it is not part of
    the serialized report.
    """

    slide_path: str
    model_name: str
    result: InferenceResult
    n_patches: int
    durations_ms: dict[str, int]
    parameters: dict
    timestamp: str
    warning: str | None = None
    plan: PatchPlan | None = None

    @property
    def predicted_class(self) -> str:
        if self.n_patches == 0:
            return INDETERMINATE
        return self.result.predicted_class


@dataclass(frozen=True)
class Metrics:
    """Binary confusion counts and the rates derived from them.

    A rate whose denominator is zero is reported as 0.0 and listed in
    ``undefined`` instead of raising.
    """

    tp: int
    tn: int
    fp: int
    fn: int
    sensitivity: float
    specificity: float
    precision: float
    balanced_accuracy: float
    undefined: tuple[str, ...] = ()


class _StageClock:
    """Times named stages with a monotonic clock, in integer milliseconds."""

    def __init__(self):
        self.ns: dict[str, int] = {}
        self._t0 = time.perf_counter_ns()

    def run(self, stage: str, fn):
        start = time.perf_counter_ns()
        try:
            result = fn()
        except SlideSpinError as e:
            raise PipelineError(stage, e) from e
        except (OSError, ValueError) as e:
            raise PipelineError(stage, e) from e
        finally:
            self.ns[stage] = time.perf_counter_ns() - start
        return result

    def durations_ms(self) -> dict[str, int]:
        out = {stage: round(self.ns.get(stage, 0) / 1e6) for stage in STAGES}
        total = round((time.perf_counter_ns() - self._t0) / 1e6)
        out["total"] = max(total, max(out.values()))
        return out


def _uniform_result(weights: AggregatorWeights) -> InferenceResult:
    c = weights.n_classes
    return InferenceResult(
        logits=(0.0,) * c,
        probs=(1.0 / c,) * c,
        predicted_index=0,
        attention=(),
        class_names=weights.class_names,
    )


def _parameters_snapshot(spec: PatchSpec, manifest: ModelManifest) -> dict:
    return {
        "patch": dataclasses.asdict(spec),
        "encoder": dataclasses.asdict(manifest.encoder),
    }


def run_pipeline(
    wsi: str | Path,
    manifest: ModelManifest,
    weights: AggregatorWeights,
    encoder: Encoder,
    spec: PatchSpec,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
    region: list[tuple[float, float]] | None = None,
) -> RunReport:
    """Run all pipeline stages on an already-loaded model."""
    clock = _StageClock()
    slide = clock.run("open", lambda: open_slide(wsi))
    try:
        mask: TissueMask = clock.run("tissue", lambda: detect_tissue(slide))

        def _plan() -> PatchPlan:
            plan = plan_patches(slide, mask, spec)
            if region is not None:
                plan = filter_plan_by_region(plan, region)
            return plan

        plan = clock.run("plan", _plan)

        if len(plan) == 0:
            result = _uniform_result(weights)
            warning = "no tissue passed the patch filter"
        else:
            matrix = clock.run(
                "embed",
                lambda: embed_batch(encoder, plan, slide, batch_size, threads),
            )
            result = clock.run("aggregate", lambda: forward(weights, matrix))
            warning = None
    finally:
        slide.close()

    return RunReport(
        slide_path=str(wsi),
        model_name=manifest.model_name,
        result=result,
        n_patches=len(plan),
        durations_ms=clock.durations_ms(),
        parameters=_parameters_snapshot(spec, manifest),
        timestamp=datetime.now(timezone.utc).isoformat(),
        warning=warning,
        plan=plan,
    )


def run_inference(
    wsi: str | Path,
    model: ModelRef | str | Path,
    overrides: dict | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
    cache_dir: Path | None = None,
    region: list[tuple[float, float]] | None = None,
) -> RunReport:
    """Resolve a model, then run the pipeline on one slide.

    ``overrides`` may replace any PatchSpec field from the manifest
    (patch_size_px, spacing_mpp, tissue_threshold, stride_px).
    """
    ref = model if isinstance(model, ModelRef) else ModelRef.parse(str(model))
    bundle_dir = resolve_model(ref, cache_dir=cache_dir)
    manifest, weights = load_bundle(bundle_dir)
    encoder = load_encoder(manifest.encoder, bundle_dir)
    spec = manifest.patch
    if overrides:
        spec = dataclasses.replace(
            spec, **{k: v for k, v in overrides.items() if v is not None}
        )
    return run_pipeline(
        wsi, manifest, weights, encoder, spec, batch_size, threads, region
    )


def compute_metrics(
    pred_labels: list[int], true_labels: list[int], positive_index: int
) -> Metrics:
    """Binary confusion-matrix metrics against one positive class index."""
    if len(pred_labels) != len(true_labels):
        raise LengthMismatchError(
            f"{len(pred_labels)} predictions vs {len(true_labels)} truths"
        )
    if not pred_labels:
        raise EmptyInputError("metrics need at least one labeled example")
    tp = tn = fp = fn = 0
    for pred, true in zip(pred_labels, true_labels):
        pred_pos = pred == positive_index
        true_pos = true == positive_index
        if pred_pos and true_pos:
            tp += 1
        elif not pred_pos and not true_pos:
            tn += 1
        elif pred_pos:
            fp += 1
        else:
            fn += 1

    undefined = []

    def rate(num: int, den: int, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    sensitivity = rate(tp, tp + fn, "sensitivity")
    specificity = rate(tn, tn + fp, "specificity")
    precision = rate(tp, tp + fp, "precision")
    return Metrics(
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        sensitivity=sensitivity,
        specificity=specificity,
        precision=precision,
        balanced_accuracy=(sensitivity + specificity) / 2,
        undefined=tuple(undefined),
    )


def filter_plan_by_region(
    plan: PatchPlan, region: list[tuple[float, float]]
) -> PatchPlan:
    """Keep only patches whose center lies inside a level-0 polygon."""
    polygon = validate_region(region)
    patches = []
    fractions = []
    for (x, y, side), frac in zip(plan.patches, plan.tissue_fractions):
        if contains_xy(polygon, x + side / 2, y + side / 2):
            patches.append((x, y, side))
            fractions.append(frac)
    return dataclasses.replace(
        plan, patches=tuple(patches), tissue_fractions=tuple(fractions)
    )


def validate_region(region: list[tuple[float, float]]) -> Polygon:
    """A usable region is a simple (non-self-intersecting) ring of >= 3 points."""
    if region is None or len(region) < 3:
        raise InvalidPolygonError("region needs at least 3 vertices")
    try:
        polygon = Polygon(region)
    except (ValueError, TypeError) as e:
        raise InvalidPolygonError(f"region is not a polygon: {e}") from e
    if not polygon.is_valid or polygon.area == 0:
        raise InvalidPolygonError("region polygon must be simple and non-degenerate")
    return polygon


def export_geojson(plan: PatchPlan, result: InferenceResult, report: RunReport) -> dict:
    """Per-patch square polygons with attention, as a GeoJSON FeatureCollection."""
    if len(plan) != len(result.attention):
        raise LengthMismatchError(
            f"plan has {len(plan)} patches but result carries "
            f"{len(result.attention)} attention scores"
        )
    features = []
    for i, ((x, y, side), frac) in enumerate(
        zip(plan.patches, plan.tissue_fractions)
    ):
        ring = [
            [x, y],
            [x + side, y],
            [x + side, y + side],
            [x, y + side],
            [x, y],
        ]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "index": i,
                    "attention": result.attention[i],
                    "tissue_fraction": frac,
                },
            }
        )
    return {
        "type": "FeatureCollection",
        "features": features,
        "properties": {
            "model_name": report.model_name,
            "predicted_class": report.predicted_class,
            "probs": list(result.probs),
            "class_names": list(result.class_names),
        },
    }


def report_to_dict(report: RunReport) -> dict:
    """JSON-ready view of a report."""
    return {
        "slide_path": report.slide_path,
        "model_name": report.model_name,
        "predicted_class": report.predicted_class,
        "predicted_index": report.result.predicted_index,
        "class_names": list(report.result.class_names),
        "logits": list(report.result.logits),
        "probs": list(report.result.probs),
        "attention": list(report.result.attention),
        "n_patches": report.n_patches,
        "durations_ms": dict(report.durations_ms),
        "parameters": report.parameters,
        "timestamp": report.timestamp,
        "warning": report.warning,
    }
