"""HTTP service tests: slide/model listing, tiles, jobs, region runs."""

from __future__ import annotations

import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from slidespin.demo import make_blank_slide, make_blob_slide, make_demo_bundle
from slidespin.service import create_app


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    root = tmp_path_factory.mktemp("service_env")
    models = root / "models"
    slides = root / "slides"
    models.mkdir()
    slides.mkdir()
    make_demo_bundle(models / "reference-demo")
    make_blob_slide(slides / "blob_slide")
    make_blank_slide(slides / "blank_slide")
    return {"models": models, "slides": slides}


@pytest.fixture()
def client(env):
    app = create_app(models_dir=env["models"], slides_dir=env["slides"])
    with TestClient(app) as c:
        yield c


def wait_for_job(client, job_id, timeout_s=30.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        payload = client.get(f"/api/jobs/{job_id}").json()
        if payload["status"] in ("done", "error"):
            return payload
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish in {timeout_s}s")


def start_job(client, slide_id="blob_slide", model="reference-demo", region=None):
    body = {"slide_id": slide_id, "model_name": model}
    if region is not None:
        body["region"] = region
    response = client.post("/api/infer", json=body)
    assert response.status_code == 200, response.text
    return response.json()["job_id"]


class TestSlideEndpoints:
    def test_list_slides(self, client):
        slides = client.get("/api/slides").json()
        assert [s["id"] for s in slides] == ["blank_slide", "blob_slide"]
        blob = slides[1]
        assert blob["width"] == 2048 and blob["height"] == 2048
        assert blob["levels"][0]["downsample"] == 1.0
        assert blob["levels"][1]["downsample"] == 2.0
        assert blob["tile_size"] == 256

    def test_get_single_slide(self, client):
        info = client.get("/api/slides/blob_slide").json()
        assert info["id"] == "blob_slide"
        assert len(info["levels"]) == 2

    def test_unknown_slide_404(self, client):
        assert client.get("/api/slides/nope").status_code == 404

    def test_tile_is_256_png_with_expected_pixels(self, client):
        response = client.get("/api/slides/blob_slide/tiles/0/0/0")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        img = Image.open(io.BytesIO(response.content))
        assert img.size == (256, 256)
        arr = np.asarray(img)
        assert (arr == 255).all()  # top-left corner of the blob slide is white

        # a center tile is inside the dark blob
        response = client.get("/api/slides/blob_slide/tiles/0/4/4")
        arr = np.asarray(Image.open(io.BytesIO(response.content)))
        assert (arr == 60).all()

    def test_tile_level_mapping(self, client):
        # level 1 (downsample 2) tile 0 covers level-0 (0,0,512,512)
        response = client.get("/api/slides/blob_slide/tiles/1/0/0")
        arr = np.asarray(Image.open(io.BytesIO(response.content)))
        assert arr.shape == (256, 256, 3)

    def test_tile_out_of_bounds_404(self, client):
        assert client.get("/api/slides/blob_slide/tiles/0/99/0").status_code == 404
        assert client.get("/api/slides/blob_slide/tiles/5/0/0").status_code == 404


class TestModelEndpoints:
    def test_list_models(self, client):
        models = client.get("/api/models").json()
        assert len(models) == 1
        assert models[0]["name"] == "reference-demo"
        assert models[0]["class_names"] == ["negative", "positive"]
        assert models[0]["patch_size_px"] == 256


class TestJobs:
    def test_full_job_lifecycle(self, client):
        job_id = start_job(client)
        payload = wait_for_job(client, job_id)
        assert payload["status"] == "done", payload.get("error")
        report = payload["report"]
        assert report["predicted_class"] == "positive"
        assert report["n_patches"] > 0
        geojson = payload["geojson"]
        assert geojson["type"] == "FeatureCollection"
        assert len(geojson["features"]) == report["n_patches"]

    def test_raw_geojson_bytes_match_inline_payload(self, client):
        job_id = start_job(client)
        payload = wait_for_job(client, job_id)
        raw = client.get(f"/api/jobs/{job_id}/geojson")
        assert raw.status_code == 200
        assert raw.headers["content-type"].startswith("application/geo+json")
        assert json.loads(raw.content) == payload["geojson"]
        # stable across downloads, byte for byte
        again = client.get(f"/api/jobs/{job_id}/geojson")
        assert again.content == raw.content

    def test_unknown_slide_or_model_404(self, client):
        assert (
            client.post(
                "/api/infer", json={"slide_id": "nope", "model_name": "reference-demo"}
            ).status_code
            == 404
        )
        assert (
            client.post(
                "/api/infer", json={"slide_id": "blob_slide", "model_name": "nope"}
            ).status_code
            == 404
        )

    def test_unknown_job_404(self, client):
        assert client.get("/api/jobs/deadbeef").status_code == 404
        assert client.get("/api/jobs/deadbeef/geojson").status_code == 404

    def test_no_tissue_job_reports_indeterminate(self, client):
        job_id = start_job(client, slide_id="blank_slide")
        payload = wait_for_job(client, job_id)
        assert payload["status"] == "done"
        assert payload["report"]["predicted_class"] == "indeterminate"
        assert payload["report"]["n_patches"] == 0
        assert payload["geojson"]["features"] == []

    def test_concurrent_job_on_same_slide_409(self, env):
        # separate app so other tests' finished jobs don't interfere
        app = create_app(models_dir=env["models"], slides_dir=env["slides"])
        with TestClient(app) as client:
            job_id = start_job(client)
            response = client.post(
                "/api/infer",
                json={"slide_id": "blob_slide", "model_name": "reference-demo"},
            )
            assert response.status_code == 409
            wait_for_job(client, job_id)
            # once finished, a new job is accepted
            second = start_job(client)
            wait_for_job(client, second)


class TestRegionJobs:
    def test_covering_region_equals_unrestricted(self, client):
        base_id = start_job(client)
        base = wait_for_job(client, base_id)
        region = {
            "type": "Polygon",
            "coordinates": [[[-5, -5], [2053, -5], [2053, 2053], [-5, 2053], [-5, -5]]],
        }
        job_id = start_job(client, region=region)
        payload = wait_for_job(client, job_id)
        assert payload["status"] == "done"
        assert payload["report"]["logits"] == base["report"]["logits"]
        assert payload["report"]["attention"] == base["report"]["attention"]
        assert payload["geojson"]["features"] == base["geojson"]["features"]

    def test_region_echoed_back(self, client):
        region = {
            "type": "Polygon",
            "coordinates": [[[100, 100], [1900, 100], [1900, 1900], [100, 1900], [100, 100]]],
        }
        job_id = start_job(client, region=region)
        payload = wait_for_job(client, job_id)
        assert payload["region"] == [[100, 100], [1900, 100], [1900, 1900], [100, 1900]]

    def test_partial_region_restricts_patches(self, client):
        # left strip only: patches with center x >= 1000 disappear
        region = {
            "type": "Polygon",
            "coordinates": [[[0, 0], [1000, 0], [1000, 2048], [0, 2048], [0, 0]]],
        }
        job_id = start_job(client, region=region)
        payload = wait_for_job(client, job_id)
        assert payload["status"] == "done"
        xs = [
            f["geometry"]["coordinates"][0][0][0]
            for f in payload["geojson"]["features"]
        ]
        assert xs and all(x + 128 < 1000 for x in xs)

    def test_self_intersecting_region_422(self, client):
        region = {
            "type": "Polygon",
            "coordinates": [[[0, 0], [500, 500], [500, 0], [0, 500], [0, 0]]],
        }
        response = client.post(
            "/api/infer",
            json={
                "slide_id": "blob_slide",
                "model_name": "reference-demo",
                "region": region,
            },
        )
        assert response.status_code == 422

    def test_malformed_region_422(self, client):
        response = client.post(
            "/api/infer",
            json={
                "slide_id": "blob_slide",
                "model_name": "reference-demo",
                "region": {"type": "Point", "coordinates": [1, 2]},
            },
        )
        assert response.status_code == 422
