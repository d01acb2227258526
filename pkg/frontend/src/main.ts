/** Page bootstrap: wires the API client, state machine, and canvases. */

import { ApiClient, ApiError } from "./api.js";
import { browserSaveSink, downloadJobGeojson } from "./download.js";
import { legendStops, maxAttention } from "./heatmap.js";
import { formatMs, formatProbs, probsTotalText } from "./format.js";
import { pollJob } from "./poller.js";
import { toGeoJsonPolygon } from "./polygon.js";
import {
  annotationCleared,
  annotationDrawn,
  initialState,
  jobFailed,
  jobFinished,
  jobStarted,
  modelSelected,
  slideLoaded,
  slideLoadFailed,
  viewportChanged,
  type ViewerState,
} from "./state.js";
import { panBy, screenToLevel0, zoomAt } from "./transform.js";
import type { Point } from "./types.js";
import { TileLayer, drawAnnotation, drawHeatmap } from "./viewer.js";

const client = new ApiClient("");
let state: ViewerState = initialState();
let drawing: Point[] | null = null; // in-progress ring, level-0 coords
let lastJobId: string | null = null; // job whose result is on screen

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
const tilesCanvas = $<HTMLCanvasElement>("tiles");
const heatCanvas = $<HTMLCanvasElement>("heatmap");
const drawCanvas = $<HTMLCanvasElement>("annotation");
const slideSelect = $<HTMLSelectElement>("slide-select");
const modelSelect = $<HTMLSelectElement>("model-select");
const runButton = $<HTMLButtonElement>("run");
const drawButton = $<HTMLButtonElement>("draw");
const clearButton = $<HTMLButtonElement>("clear");
const downloadButton = $<HTMLButtonElement>("download");
const banner = $<HTMLDivElement>("banner");
const results = $<HTMLDivElement>("results");
const legend = $<HTMLDivElement>("legend");

const tileLayer = new TileLayer(client, tilesCanvas);

function setState(next: ViewerState): void {
  state = next;
  repaint();
}

function repaint(): void {
  banner.textContent = state.banner ?? "";
  banner.style.display = state.banner ? "block" : "none";
  runButton.disabled = !state.slide || !state.selectedModel || !!state.activeJobId;
  downloadButton.disabled = !state.lastResult;
  if (state.viewport && state.slide) {
    tileLayer.render(state.viewport, state.slide);
    drawHeatmap(heatCanvas, state.viewport, state.lastResult?.geojson ?? null);
    drawAnnotation(
      drawCanvas,
      state.viewport,
      drawing ?? state.annotation,
      drawing === null && state.annotation !== null,
    );
  }
  renderResults();
}

function renderResults(): void {
  results.replaceChildren();
  legend.replaceChildren();
  const last = state.lastResult;
  if (!last) return;
  const { report, geojson } = last;

  const badge = document.createElement("div");
  badge.className = `badge ${report.predicted_class === "indeterminate" ? "indeterminate" : "ok"}`;
  badge.textContent = report.predicted_class;
  results.appendChild(badge);

  for (const row of formatProbs(report.probs, report.class_names)) {
    const line = document.createElement("div");
    line.className = "prob-row";
    const bar = document.createElement("span");
    bar.className = "prob-bar";
    bar.style.width = `${(row.value * 100).toFixed(1)}%`;
    const text = document.createElement("span");
    text.textContent = `${row.label}: ${row.text}`;
    line.append(bar, text);
    results.appendChild(line);
  }
  const total = document.createElement("div");
  total.className = "prob-total";
  total.textContent = `total ${probsTotalText(report.probs)} · ${report.n_patches} patches · ${formatMs(report.durations_ms["total"] ?? 0)}`;
  results.appendChild(total);
  if (report.warning) {
    const warn = document.createElement("div");
    warn.className = "warning";
    warn.textContent = report.warning;
    results.appendChild(warn);
  }

  for (const stop of legendStops(maxAttention(geojson.features))) {
    const chip = document.createElement("span");
    chip.className = "legend-chip";
    chip.style.background = stop.color;
    chip.title = stop.value.toExponential(2);
    legend.appendChild(chip);
  }
}

async function loadSlide(slideId: string): Promise<void> {
  try {
    const info = await client.getSlide(slideId);
    drawing = null;
    setState(slideLoaded(state, info, tilesCanvas.width, tilesCanvas.height));
  } catch (e) {
    setState(slideLoadFailed(state, e instanceof Error ? e.message : String(e)));
  }
}

async function runAnalysis(): Promise<void> {
  if (!state.slideId || !state.selectedModel) return;
  const region = state.annotation ? toGeoJsonPolygon(state.annotation) : undefined;
  try {
    const jobId = await client.startInference(state.slideId, state.selectedModel, region);
    setState(jobStarted(state, jobId));
    const payload = await pollJob(client, jobId, { intervalMs: 1000 });
    if (payload.status === "error" || !payload.report || !payload.geojson) {
      setState(jobFailed(state, payload.error ?? "inference failed"));
      return;
    }
    lastJobId = jobId;
    setState(jobFinished(state, payload.report, payload.geojson));
  } catch (e) {
    const message =
      e instanceof ApiError && e.status === 409
        ? "inference already running for this slide"
        : e instanceof Error
          ? e.message
          : String(e);
    setState(jobFailed(state, message));
  }
}

function wireViewportControls(): void {
  let dragFrom: Point | null = null;
  drawCanvas.addEventListener("mousedown", (ev) => {
    if (drawing === null) dragFrom = { x: ev.offsetX, y: ev.offsetY };
  });
  drawCanvas.addEventListener("mousemove", (ev) => {
    if (dragFrom && state.viewport) {
      const vp = panBy(state.viewport, ev.offsetX - dragFrom.x, ev.offsetY - dragFrom.y);
      dragFrom = { x: ev.offsetX, y: ev.offsetY };
      setState(viewportChanged(state, vp));
    }
  });
  drawCanvas.addEventListener("mouseup", () => (dragFrom = null));
  drawCanvas.addEventListener("wheel", (ev) => {
    if (!state.viewport) return;
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
    setState(viewportChanged(state, zoomAt(state.viewport, factor, ev.offsetX, ev.offsetY)));
  });
}

function wireAnnotationControls(): void {
  drawButton.addEventListener("click", () => {
    drawing = [];
    setState(annotationCleared(state));
  });
  clearButton.addEventListener("click", () => {
    drawing = null;
    setState(annotationCleared(state));
  });
  drawCanvas.addEventListener("click", (ev) => {
    if (drawing === null || !state.viewport) return;
    drawing.push(screenToLevel0(state.viewport, { x: ev.offsetX, y: ev.offsetY }));
    repaint();
  });
  drawCanvas.addEventListener("dblclick", () => {
    if (drawing === null) return;
    const ring = drawing.slice(0, -1); // drop the duplicate from the dblclick's click
    if (ring.length < 3) return; // keep collecting vertices
    drawing = null;
    setState(annotationDrawn(state, ring));
  });
}

async function bootstrap(): Promise<void> {
  const [slides, models] = await Promise.all([client.listSlides(), client.listModels()]);
  for (const slide of slides) {
    const opt = document.createElement("option");
    opt.value = slide.id;
    opt.textContent = `${slide.id} (${slide.width}x${slide.height})`;
    slideSelect.appendChild(opt);
  }
  for (const model of models) {
    const opt = document.createElement("option");
    opt.value = model.name;
    opt.textContent = model.model_name;
    modelSelect.appendChild(opt);
  }
  slideSelect.addEventListener("change", () => void loadSlide(slideSelect.value));
  modelSelect.addEventListener("change", () =>
    setState(modelSelected(state, modelSelect.value)),
  );
  runButton.addEventListener("click", () => void runAnalysis());
  downloadButton.addEventListener("click", () => {
    if (lastJobId && state.slideId) {
      void downloadJobGeojson(client, lastJobId, state.slideId, browserSaveSink(document));
    }
  });
  wireViewportControls();
  wireAnnotationControls();
  if (slides.length > 0 && slides[0]) {
    slideSelect.value = slides[0].id;
    await loadSlide(slides[0].id);
  }
  if (models.length > 0 && models[0]) {
    modelSelect.value = models[0].name;
    setState(modelSelected(state, models[0].name));
  }
}

void bootstrap();
