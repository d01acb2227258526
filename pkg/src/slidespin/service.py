"""Local HTTP service: slide listing, tile serving, async inference jobs.

The service fronts the same pipeline the CLI runs.  Jobs run on background
threads with a polling API; at most one job may be active per slide.  The
finished GeoJSON is kept as serialized bytes so clients can download exactly
what the server produced, byte for byte.
"""

from __future__ import annotations

import io
import json
import math
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from PIL import Image
from pydantic import BaseModel

from .engine import export_geojson, report_to_dict, run_inference, validate_region
from .errors import InvalidPolygonError, SlideSpinError
from .slide_io import SlidePyramid, open_slide
from .zoo import parse_manifest

TILE_SIZE = 256


class InferRequest(BaseModel):
    slide_id: str
    model_name: str
    region: dict | None = None  # GeoJSON Polygon geometry


@dataclass
class Job:
    id: str
    slide_id: str
    model_name: str
    status: str = "queued"  # queued | running | done | error
    report: dict | None = None
    geojson_bytes: bytes | None = None
    error: str | None = None
    region: list[list[float]] | None = None


@dataclass
class JobRegistry:
    jobs: dict[str, Job] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def slide_busy(self, slide_id: str) -> bool:
        return any(
            j.slide_id == slide_id and j.status in ("queued", "running")
            for j in self.jobs.values()
        )


def _list_slides(slides_dir: Path) -> list[Path]:
    entries = []
    for path in sorted(slides_dir.iterdir(), key=lambda p: p.name):
        if path.is_dir() and (path / "pyramid.json").is_file():
            entries.append(path)
        elif path.suffix.lower() in (".tif", ".tiff"):
            entries.append(path)
    return entries


def _slide_info(slide: SlidePyramid, slide_id: str) -> dict:
    return {
        "id": slide_id,
        "width": slide.width,
        "height": slide.height,
        "mpp_x": slide.mpp_x,
        "mpp_y": slide.mpp_y,
        "tile_size": TILE_SIZE,
        "levels": [
            {
                "index": lv.index,
                "width": lv.width,
                "height": lv.height,
                "downsample": lv.downsample,
            }
            for lv in slide.levels
        ],
    }


def _region_ring(region: dict) -> list[tuple[float, float]]:
    """Extract and validate the outer ring of a GeoJSON Polygon geometry."""
    if (
        not isinstance(region, dict)
        or region.get("type") != "Polygon"
        or not isinstance(region.get("coordinates"), list)
        or not region["coordinates"]
    ):
        raise InvalidPolygonError("region must be a GeoJSON Polygon geometry")
    ring = region["coordinates"][0]
    if not isinstance(ring, list) or any(
        not isinstance(pt, (list, tuple)) or len(pt) != 2 for pt in ring
    ):
        raise InvalidPolygonError("region ring must be a list of [x, y] pairs")
    points = [(float(x), float(y)) for x, y in ring]
    if len(points) > 1 and points[0] == points[-1]:
        points = points[:-1]  # drop GeoJSON ring closure
    validate_region(points)
    return points


def create_app(models_dir: str | Path, slides_dir: str | Path) -> FastAPI:
    models_dir = Path(models_dir)
    slides_dir = Path(slides_dir)
    app = FastAPI(title="slidespin service")
    registry = JobRegistry()

    def slide_path_for(slide_id: str) -> Path:
        for path in _list_slides(slides_dir):
            if path.name == slide_id:
                return path
        raise HTTPException(status_code=404, detail=f"unknown slide {slide_id!r}")

    def model_dir_for(model_name: str) -> Path:
        path = models_dir / model_name
        if not (path / "manifest.json").is_file():
            raise HTTPException(status_code=404, detail=f"unknown model {model_name!r}")
        return path

    @app.get("/api/slides")
    def list_slides():
        out = []
        for path in _list_slides(slides_dir):
            with open_slide(path) as slide:
                out.append(_slide_info(slide, path.name))
        return out

    @app.get("/api/slides/{slide_id}")
    def get_slide(slide_id: str):
        with open_slide(slide_path_for(slide_id)) as slide:
            return _slide_info(slide, slide_id)

    @app.get("/api/slides/{slide_id}/tiles/{level}/{tx}/{ty}")
    def get_tile(slide_id: str, level: int, tx: int, ty: int):
        path = slide_path_for(slide_id)
        with open_slide(path) as slide:
            if not 0 <= level < slide.level_count:
                raise HTTPException(status_code=404, detail="no such level")
            info = slide.levels[level]
            if tx < 0 or ty < 0 or tx * TILE_SIZE >= info.width or ty * TILE_SIZE >= info.height:
                raise HTTPException(status_code=404, detail="tile outside slide")
            # choose the level-0 origin that floor-maps onto this tile's corner
            x0 = math.ceil(tx * TILE_SIZE * info.downsample)
            y0 = math.ceil(ty * TILE_SIZE * info.downsample)
            patch = slide.read_region(level, x0, y0, TILE_SIZE, TILE_SIZE)
        buf = io.BytesIO()
        Image.fromarray(patch.data).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/models")
    def list_models():
        out = []
        for path in sorted(models_dir.iterdir(), key=lambda p: p.name):
            manifest_path = path / "manifest.json"
            if not manifest_path.is_file():
                continue
            try:
                manifest = parse_manifest(manifest_path.read_text("utf-8"))
            except SlideSpinError:
                continue  # unlistable bundles are skipped, not fatal
            out.append(
                {
                    "name": path.name,
                    "model_name": manifest.model_name,
                    "description": manifest.description,
                    "class_names": list(manifest.class_names),
                    "patch_size_px": manifest.patch.patch_size_px,
                }
            )
        return out

    def _run_job(job: Job, wsi: Path, bundle_dir: Path):
        try:
            report = run_inference(wsi, bundle_dir, region=job.region)
            doc = export_geojson(report.plan, report.result, report)
            with registry.lock:
                job.report = report_to_dict(report)
                job.geojson_bytes = json.dumps(doc).encode("utf-8")
                job.status = "done"
        except Exception as e:  # surfaced to the client, never crashes the app
            with registry.lock:
                job.error = str(e)
                job.status = "error"

    @app.post("/api/infer")
    def infer(request: InferRequest):
        wsi = slide_path_for(request.slide_id)
        bundle_dir = model_dir_for(request.model_name)
        region = None
        if request.region is not None:
            try:
                region = _region_ring(request.region)
            except InvalidPolygonError as e:
                raise HTTPException(status_code=422, detail=str(e)) from e
        with registry.lock:
            if registry.slide_busy(request.slide_id):
                raise HTTPException(
                    status_code=409,
                    detail=f"inference already running for slide {request.slide_id!r}",
                )
            job = Job(
                id=uuid.uuid4().hex,
                slide_id=request.slide_id,
                model_name=request.model_name,
                region=region,
            )
            registry.jobs[job.id] = job
            job.status = "running"
        thread = threading.Thread(
            target=_run_job, args=(job, wsi, bundle_dir), daemon=True
        )
        thread.start()
        return {"job_id": job.id}

    def job_for(job_id: str) -> Job:
        job = registry.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = job_for(job_id)
        with registry.lock:
            payload = {
                "job_id": job.id,
                "slide_id": job.slide_id,
                "model_name": job.model_name,
                "status": job.status,
                "region": job.region,
            }
            if job.status == "done":
                payload["report"] = job.report
                payload["geojson"] = json.loads(job.geojson_bytes)
            if job.status == "error":
                payload["error"] = job.error
        return payload

    @app.get("/api/jobs/{job_id}/geojson")
    def get_job_geojson(job_id: str):
        job = job_for(job_id)
        with registry.lock:
            if job.status != "done":
                raise HTTPException(
                    status_code=409, detail=f"job is {job.status}, not done"
                )
            body = job.geojson_bytes
        return Response(content=body, media_type="application/geo+json")

    return app
