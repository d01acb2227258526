"""End-to-end pipeline, metrics, region filtering, and GeoJSON export tests."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slidespin.aggregator import InferenceResult, forward
from slidespin.demo import (
    make_blank_slide,
    make_blob_slide,
    make_demo_bundle,
    make_quadrant_slide,
)
from slidespin.encoder import ReferenceEncoder, embed_batch
from slidespin.engine import (
    INDETERMINATE,
    RunReport,
    compute_metrics,
    export_geojson,
    filter_plan_by_region,
    report_to_dict,
    run_inference,
)
from slidespin.errors import (
    EmptyInputError,
    InvalidPolygonError,
    LengthMismatchError,
    PipelineError,
)
from slidespin.patching import PatchSpec, plan_patches
from slidespin.slide_io import open_slide
from slidespin.tissue import TissueMask
from slidespin.zoo import load_bundle

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def demo_assets(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo_assets")
    return {
        "bundle": make_demo_bundle(root / "bundle"),
        "blob": make_blob_slide(root / "blob_slide"),
        "blank": make_blank_slide(root / "blank_slide"),
        "quadrant": make_quadrant_slide(root / "quadrant_slide"),
    }


class TestRunInference:
    def test_blob_slide_predicts_positive(self, demo_assets):
        report = run_inference(demo_assets["blob"], demo_assets["bundle"])
        assert report.predicted_class == "positive"
        assert report.n_patches > 0
        assert report.n_patches == len(report.result.attention)
        assert report.warning is None
        assert sum(report.result.probs) == pytest.approx(1.0, abs=1e-9)

    def test_determinism_across_runs_and_settings(self, demo_assets):
        reports = [
            run_inference(
                demo_assets["blob"], demo_assets["bundle"], batch_size=b, threads=t
            )
            for b, t in [(32, 1), (1, 1), (7, 4), (32, 4)]
        ]
        first = reports[0]
        for other in reports[1:]:
            assert other.result.logits == first.result.logits  # bitwise: same floats
            assert other.result.attention == first.result.attention
            assert other.plan.patches == first.plan.patches

    def test_blank_slide_is_indeterminate_not_an_error(self, demo_assets):
        report = run_inference(demo_assets["blank"], demo_assets["bundle"])
        assert report.n_patches == 0
        assert report.predicted_class == INDETERMINATE
        assert report.warning is not None
        assert report.result.probs == (0.5, 0.5)
        assert report.result.attention == ()
        assert report.durations_ms["embed"] == 0
        assert report.durations_ms["aggregate"] == 0

    def test_timing_report_is_sane(self, demo_assets):
        report = run_inference(demo_assets["blob"], demo_assets["bundle"])
        durations = report.durations_ms
        stages = [durations[s] for s in ("open", "tissue", "plan", "embed", "aggregate")]
        assert all(v >= 0 for v in stages)
        assert durations["total"] >= max(stages)
        assert durations["total"] <= 1.25 * sum(stages) + 1  # +1 absorbs ms rounding

    def test_patch_spec_overrides_applied(self, demo_assets):
        report = run_inference(
            demo_assets["blob"],
            demo_assets["bundle"],
            overrides={"patch_size_px": 512, "tissue_threshold": 0.25},
        )
        assert report.parameters["patch"]["patch_size_px"] == 512
        assert report.parameters["patch"]["tissue_threshold"] == 0.25
        assert all(side == 512 for _, _, side in report.plan.patches)

    def test_failures_carry_the_stage_name(self, tmp_path, demo_assets):
        junk = tmp_path / "junk.tif"
        junk.write_bytes(b"\x00" * 64)
        with pytest.raises(PipelineError) as excinfo:
            run_inference(junk, demo_assets["bundle"])
        assert excinfo.value.stage == "open"


class TestRegionFilter:
    def _plan(self, demo_assets):
        with open_slide(demo_assets["quadrant"]) as slide:
            mask = TissueMask(np.ones((512, 512), np.uint8), 1.0, 1.0, 0)
            return plan_patches(slide, mask, PatchSpec(patch_size_px=256))

    def test_covering_polygon_is_identity(self, demo_assets):
        plan = self._plan(demo_assets)
        covering = [(-1, -1), (513, -1), (513, 513), (-1, 513)]
        assert filter_plan_by_region(plan, covering) == plan

    def test_half_polygon_keeps_left_column(self, demo_assets):
        plan = self._plan(demo_assets)
        left = [(0, 0), (256, 0), (256, 512), (0, 512)]
        filtered = filter_plan_by_region(plan, left)
        assert filtered.patches == ((0, 0, 256), (0, 256, 256))

    def test_region_equals_unrestricted_run(self, demo_assets):
        covering = [(-10.0, -10.0), (3000.0, -10.0), (3000.0, 3000.0), (-10.0, 3000.0)]
        base = run_inference(demo_assets["blob"], demo_assets["bundle"])
        restricted = run_inference(
            demo_assets["blob"], demo_assets["bundle"], region=covering
        )
        assert restricted.result == base.result
        assert restricted.plan.patches == base.plan.patches

    def test_bowtie_rejected(self, demo_assets):
        plan = self._plan(demo_assets)
        bowtie = [(0, 0), (512, 512), (512, 0), (0, 512)]
        with pytest.raises(InvalidPolygonError):
            filter_plan_by_region(plan, bowtie)

    def test_too_few_vertices_rejected(self, demo_assets):
        plan = self._plan(demo_assets)
        with pytest.raises(InvalidPolygonError):
            filter_plan_by_region(plan, [(0, 0), (10, 10)])


class TestComputeMetrics:
    def test_perfect_predictions(self):
        metrics = compute_metrics([1, 0, 1, 0], [1, 0, 1, 0], positive_index=1)
        assert metrics.sensitivity == 1.0
        assert metrics.specificity == 1.0
        assert metrics.precision == 1.0
        assert metrics.balanced_accuracy == 1.0
        assert metrics.undefined == ()

    def test_hand_counted_confusion_matrix(self):
        # tp=2, fn=2, tn=9, fp=1
        preds = [1, 1, 0, 0, 1] + [0] * 9
        truth = [1, 1, 1, 1, 0] + [0] * 9
        metrics = compute_metrics(preds, truth, positive_index=1)
        assert (metrics.tp, metrics.fn, metrics.tn, metrics.fp) == (2, 2, 9, 1)
        assert metrics.sensitivity == pytest.approx(0.5)
        assert metrics.specificity == pytest.approx(0.9)
        assert metrics.precision == pytest.approx(2 / 3)
        assert metrics.balanced_accuracy == pytest.approx(0.7)

    def test_published_sensitivity_specificity_pair(self):
        # sens 0.806 (tp=806/1000), spec 0.989 (tn=989/1000)
        preds = [1] * 806 + [0] * 194 + [0] * 989 + [1] * 11
        truth = [1] * 1000 + [0] * 1000
        metrics = compute_metrics(preds, truth, positive_index=1)
        assert metrics.sensitivity == pytest.approx(0.806, abs=1e-12)
        assert metrics.specificity == pytest.approx(0.989, abs=1e-12)
        assert metrics.balanced_accuracy == pytest.approx(0.8975, abs=0.0005)
        assert round(metrics.balanced_accuracy, 3) == 0.897

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            compute_metrics([1, 0], [1], positive_index=1)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            compute_metrics([], [], positive_index=1)

    def test_zero_denominator_is_flagged_not_fatal(self):
        metrics = compute_metrics([0, 0], [0, 0], positive_index=1)
        assert metrics.sensitivity == 0.0
        assert "sensitivity" in metrics.undefined
        assert "precision" in metrics.undefined
        assert metrics.specificity == 1.0

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1))
    @settings(max_examples=60)
    def test_swapping_positive_class_swaps_sens_and_spec(self, pairs):
        preds = [p for p, _ in pairs]
        truth = [t for _, t in pairs]
        m1 = compute_metrics(preds, truth, positive_index=1)
        m0 = compute_metrics(preds, truth, positive_index=0)
        assert m1.sensitivity == m0.specificity
        assert m1.specificity == m0.sensitivity
        assert m1.balanced_accuracy == pytest.approx(m0.balanced_accuracy, abs=1e-12)
        assert m1.balanced_accuracy == pytest.approx(
            (m1.sensitivity + m1.specificity) / 2, abs=1e-15
        )


def quadrant_run(demo_assets):
    """plan + result + report for the 4-quadrant fixture with an explicit
    all-tissue mask (the quadrants differ only in darkness)."""
    bundle_dir = demo_assets["bundle"]
    manifest, weights = load_bundle(bundle_dir)
    with open_slide(demo_assets["quadrant"]) as slide:
        mask = TissueMask(np.ones((512, 512), np.uint8), 1.0, 1.0, 0)
        plan = plan_patches(slide, mask, PatchSpec(patch_size_px=256))
        encoder = ReferenceEncoder(manifest.encoder)
        matrix = embed_batch(encoder, plan, slide)
    result = forward(weights, matrix)
    report = RunReport(
        slide_path=str(demo_assets["quadrant"]),
        model_name=manifest.model_name,
        result=result,
        n_patches=len(plan),
        durations_ms={s: 0 for s in ("open", "tissue", "plan", "embed", "aggregate", "total")},
        parameters={},
        timestamp="1970-01-01T00:00:00+00:00",
        plan=plan,
    )
    return plan, result, report


def assert_json_close(got, expected, path="$"):
    """Recursive structural equality with 1e-9 tolerance on floats."""
    if isinstance(expected, float) or isinstance(got, float):
        assert got == pytest.approx(expected, abs=1e-9), f"at {path}"
    elif isinstance(expected, dict):
        assert isinstance(got, dict) and got.keys() == expected.keys(), f"at {path}"
        for key in expected:
            assert_json_close(got[key], expected[key], f"{path}.{key}")
    elif isinstance(expected, list):
        assert isinstance(got, list) and len(got) == len(expected), f"at {path}"
        for i, (g, e) in enumerate(zip(got, expected)):
            assert_json_close(g, e, f"{path}[{i}]")
    else:
        assert got == expected, f"at {path}"


class TestExportGeojson:
    def test_single_patch_ring_closure(self, demo_assets):
        plan, result, report = quadrant_run(demo_assets)
        doc = export_geojson(plan, result, report)
        ring = doc["features"][0]["geometry"]["coordinates"][0]
        assert len(ring) == 5
        assert ring[0] == ring[-1]
        assert ring == [[0, 0], [256, 0], [256, 256], [0, 256], [0, 0]]

    def test_four_patches_attention_sums_to_one(self, demo_assets):
        plan, result, report = quadrant_run(demo_assets)
        doc = export_geojson(plan, result, report)
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 4
        total = sum(f["properties"]["attention"] for f in doc["features"])
        assert total == pytest.approx(1.0, abs=1e-6)
        assert [f["properties"]["index"] for f in doc["features"]] == [0, 1, 2, 3]

    def test_empty_plan_keeps_top_level_properties(self, demo_assets):
        report = run_inference(demo_assets["blank"], demo_assets["bundle"])
        doc = export_geojson(report.plan, report.result, report)
        assert doc["features"] == []
        assert doc["properties"]["predicted_class"] == INDETERMINATE
        assert doc["properties"]["model_name"] == "reference-demo"
        assert doc["properties"]["probs"] == [0.5, 0.5]

    def test_length_mismatch_rejected(self, demo_assets):
        plan, result, report = quadrant_run(demo_assets)
        short = InferenceResult(
            logits=result.logits,
            probs=result.probs,
            predicted_index=result.predicted_index,
            attention=result.attention[:-1],
            class_names=result.class_names,
        )
        with pytest.raises(LengthMismatchError):
            export_geojson(plan, short, report)

    def test_matches_golden_file(self, demo_assets):
        plan, result, report = quadrant_run(demo_assets)
        doc = export_geojson(plan, result, report)
        golden = json.loads((DATA_DIR / "golden_4patch.geojson").read_text())
        assert_json_close(doc, golden)

    def test_export_is_valid_json_and_stable(self, demo_assets):
        plan, result, report = quadrant_run(demo_assets)
        a = json.dumps(export_geojson(plan, result, report), sort_keys=True)
        b = json.dumps(export_geojson(plan, result, report), sort_keys=True)
        assert a == b
        assert json.loads(a)["type"] == "FeatureCollection"


class TestReportDict:
    def test_serializes_to_json(self, demo_assets):
        report = run_inference(demo_assets["blob"], demo_assets["bundle"])
        doc = report_to_dict(report)
        text = json.dumps(doc)
        parsed = json.loads(text)
        assert parsed["predicted_class"] == "positive"
        assert parsed["n_patches"] == report.n_patches
        assert set(parsed["durations_ms"]) == {
            "open", "tissue", "plan", "embed", "aggregate", "total",
        }
        assert parsed["warning"] is None
        assert len(parsed["attention"]) == parsed["n_patches"]

    def test_quadrant_attention_orders_by_darkness_inverse(self, demo_assets):
        # darker quadrants have smaller tanh features -> lower attention score
        _, result, _ = quadrant_run(demo_assets)
        assert list(result.attention) == sorted(result.attention)
        # all four gray levels are below mid-gray, so the darkness head fires
        assert result.predicted_class == "positive"
        expected_e = [4 * math.tanh(g / 255) for g in (40, 60, 80, 100)]
        m = max(expected_e)
        exps = [math.exp(e - m) for e in expected_e]
        expected_a = [v / sum(exps) for v in exps]
        np.testing.assert_allclose(result.attention, expected_a, atol=1e-6)
