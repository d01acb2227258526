/** Single-page viewer state machine.
 *
 * All transitions are pure (state in, state out) so they can be tested
 * without a DOM.  Two invariants are enforced here rather than in the
 * render layer: an annotation is only ever stored if it is a simple ring
 * with at least 3 vertices, and a finished result is only accepted when its
 * heatmap feature count equals the reported patch count.  At most one job
 * may be active at a time.
 */

import { isSimpleRing } from "./polygon.js";
import type { Viewport } from "./transform.js";
import { fitViewport } from "./transform.js";
import type { GeoJsonExport, Point, RunReport, SlideInfo } from "./types.js";

export interface LastResult {
  report: RunReport;
  geojson: GeoJsonExport;
}

export interface ViewerState {
  slideId: string | null;
  slide: SlideInfo | null;
  viewport: Viewport | null;
  annotation: Point[] | null;
  selectedModel: string | null;
  activeJobId: string | null;
  lastResult: LastResult | null;
  banner: string | null;
}

export function initialState(): ViewerState {
  return {
    slideId: null,
    slide: null,
    viewport: null,
    annotation: null,
    selectedModel: null,
    activeJobId: null,
    lastResult: null,
    banner: null,
  };
}

/** Slide metadata arrived: fit the whole slide into the viewport. */
export function slideLoaded(
  state: ViewerState,
  slide: SlideInfo,
  viewportWidth: number,
  viewportHeight: number,
): ViewerState {
  return {
    ...state,
    slideId: slide.id,
    slide,
    viewport: fitViewport(slide, viewportWidth, viewportHeight),
    annotation: null,
    lastResult: null,
    banner: null,
  };
}

export function slideLoadFailed(state: ViewerState, message: string): ViewerState {
  return { ...state, slideId: null, slide: null, viewport: null, banner: message };
}

export function viewportChanged(state: ViewerState, viewport: Viewport): ViewerState {
  return { ...state, viewport };
}

export function modelSelected(state: ViewerState, modelName: string): ViewerState {
  return { ...state, selectedModel: modelName };
}

/** Store a drawn ring, or refuse it with a warning when it self-intersects. */
export function annotationDrawn(state: ViewerState, ring: Point[]): ViewerState {
  if (!isSimpleRing(ring)) {
    return {
      ...state,
      banner: "region outline crosses itself; redraw it without intersections",
    };
  }
  return { ...state, annotation: ring, banner: null };
}

export function annotationCleared(state: ViewerState): ViewerState {
  return { ...state, annotation: null };
}

export function jobStarted(state: ViewerState, jobId: string): ViewerState {
  if (state.activeJobId !== null) {
    throw new Error(`a job is already active (${state.activeJobId})`);
  }
  return { ...state, activeJobId: jobId, banner: null };
}

/** Accept a finished job's payload verbatim; never rescale or reorder it. */
export function jobFinished(
  state: ViewerState,
  report: RunReport,
  geojson: GeoJsonExport,
): ViewerState {
  if (geojson.features.length !== report.n_patches) {
    throw new Error(
      `result is inconsistent: ${geojson.features.length} heatmap features ` +
        `for ${report.n_patches} patches`,
    );
  }
  return { ...state, activeJobId: null, lastResult: { report, geojson }, banner: null };
}

export function jobFailed(state: ViewerState, message: string): ViewerState {
  return { ...state, activeJobId: null, banner: message };
}
