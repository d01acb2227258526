/** Wire types for the slidespin HTTP API, mirrored field-for-field. */

export interface LevelInfo {
  index: number;
  width: number;
  height: number;
  downsample: number;
}

export interface SlideInfo {
  id: string;
  width: number;
  height: number;
  mpp_x: number | null;
  mpp_y: number | null;
  tile_size: number;
  levels: LevelInfo[];
}

export interface ModelInfo {
  name: string;
  model_name: string;
  description: string;
  class_names: string[];
  patch_size_px: number;
}

export interface RunReport {
  slide_path: string;
  model_name: string;
  predicted_class: string;
  predicted_index: number;
  class_names: string[];
  logits: number[];
  probs: number[];
  attention: number[];
  n_patches: number;
  durations_ms: Record<string, number>;
  parameters: Record<string, unknown>;
  timestamp: string;
  warning: string | null;
}

export interface GeoJsonFeature {
  type: "Feature";
  geometry: { type: "Polygon"; coordinates: number[][][] };
  properties: { index: number; attention: number; tissue_fraction: number };
}

export interface GeoJsonExport {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
  properties: {
    model_name: string;
    predicted_class: string;
    probs: number[];
    class_names: string[];
  };
}

export type JobStatus = "queued" | "running" | "done" | "error";

export interface JobPayload {
  job_id: string;
  slide_id: string;
  model_name: string;
  status: JobStatus;
  region: number[][] | null;
  report?: RunReport;
  geojson?: GeoJsonExport;
  error?: string;
}

/** A point in level-0 slide pixels. */
export interface Point {
  x: number;
  y: number;
}
