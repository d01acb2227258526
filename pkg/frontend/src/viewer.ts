/** Canvas rendering: tile layer, attention heatmap, annotation overlay.
 *
 * Tiles load concurrently through the browser's image pipeline; a render
 * generation counter makes loads cancelable — a tile that finishes after
 * the viewport moved on repaints nothing stale.
 */

import type { ApiClient } from "./api.js";
import { attentionColor, featureScreenRect, maxAttention } from "./heatmap.js";
import {
  levelForZoom,
  level0ToScreen,
  tileScreenRect,
  visibleTiles,
  type Viewport,
} from "./transform.js";
import type { GeoJsonExport, Point, SlideInfo } from "./types.js";

export class TileLayer {
  private cache = new Map<string, HTMLImageElement>();
  private generation = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly canvas: HTMLCanvasElement,
  ) {}

  render(vp: Viewport, slide: SlideInfo): void {
    const generation = ++this.generation;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#222";
    ctx.fillRect(0, 0, vp.width, vp.height);
    const level = levelForZoom(slide.levels, vp.zoom);
    const range = visibleTiles(vp, level, slide.tile_size);
    for (let ty = range.tyMin; ty <= range.tyMax; ty++) {
      for (let tx = range.txMin; tx <= range.txMax; tx++) {
        const url = this.client.tileUrl(slide.id, level.index, tx, ty);
        const rect = tileScreenRect(vp, level, slide.tile_size, tx, ty);
        const cached = this.cache.get(url);
        if (cached && cached.complete) {
          ctx.drawImage(cached, rect.x, rect.y, rect.w, rect.h);
        } else if (!cached) {
          const img = new Image();
          img.src = url;
          this.cache.set(url, img);
          img.onload = () => {
            // repaint only if no newer viewport superseded this render
            if (this.generation === generation) this.render(vp, slide);
          };
        }
      }
    }
  }
}

export function drawHeatmap(
  canvas: HTMLCanvasElement,
  vp: Viewport,
  geojson: GeoJsonExport | null,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, vp.width, vp.height);
  if (!geojson) return;
  const max = maxAttention(geojson.features);
  for (const feature of geojson.features) {
    const rect = featureScreenRect(vp, feature);
    ctx.fillStyle = attentionColor(feature.properties.attention, max);
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    ctx.strokeStyle = "rgba(204, 41, 54, 0.9)";
    ctx.lineWidth = 1;
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
  }
}

export function drawAnnotation(
  canvas: HTMLCanvasElement,
  vp: Viewport,
  ring: Point[] | null,
  closed: boolean,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, vp.width, vp.height);
  if (!ring || ring.length === 0) return;
  ctx.beginPath();
  ring.forEach((p, i) => {
    const s = level0ToScreen(vp, p);
    if (i === 0) ctx.moveTo(s.x, s.y);
    else ctx.lineTo(s.x, s.y);
  });
  if (closed) ctx.closePath();
  ctx.strokeStyle = "#2c7fb8";
  ctx.lineWidth = 2;
  ctx.stroke();
  for (const p of ring) {
    const s = level0ToScreen(vp, p);
    ctx.beginPath();
    ctx.arc(s.x, s.y, 3, 0, 2 * Math.PI);
    ctx.fillStyle = "#2c7fb8";
    ctx.fill();
  }
}
