/** Thin typed client for the slidespin HTTP API. */

import type { JobPayload, ModelInfo, SlideInfo } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function raiseForStatus(res: globalThis.Response): Promise<void> {
  if (res.ok) return;
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  listSlides(): Promise<SlideInfo[]> {
    return this.getJson("/api/slides");
  }

  getSlide(slideId: string): Promise<SlideInfo> {
    return this.getJson(`/api/slides/${encodeURIComponent(slideId)}`);
  }

  tileUrl(slideId: string, level: number, tx: number, ty: number): string {
    return `${this.baseUrl}/api/slides/${encodeURIComponent(slideId)}/tiles/${level}/${tx}/${ty}`;
  }

  listModels(): Promise<ModelInfo[]> {
    return this.getJson("/api/models");
  }

  async startInference(
    slideId: string,
    modelName: string,
    region?: { type: "Polygon"; coordinates: number[][][] },
  ): Promise<string> {
    const res = await fetch(`${this.baseUrl}/api/infer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        slide_id: slideId,
        model_name: modelName,
        region: region ?? null,
      }),
    });
    await raiseForStatus(res);
    const body = (await res.json()) as { job_id: string };
    return body.job_id;
  }

  getJob(jobId: string): Promise<JobPayload> {
    return this.getJson(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  /** The finished job's GeoJSON exactly as the server serialized it. */
  async getJobGeojsonBytes(jobId: string): Promise<Uint8Array> {
    const res = await fetch(
      `${this.baseUrl}/api/jobs/${encodeURIComponent(jobId)}/geojson`,
    );
    await raiseForStatus(res);
    return new Uint8Array(await res.arrayBuffer());
  }
}
