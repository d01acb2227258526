/** Attention heatmap styling: a single-hue linear opacity ramp.
 *
 * Opacity endpoints are fixed so renders are comparable across runs:
 * attention 0 is fully transparent and the per-run maximum attention is
 * drawn at opacity 0.8.
 */

import type { GeoJsonFeature, Point } from "./types.js";
import { level0ToScreen, type Viewport } from "./transform.js";

export const MAX_OPACITY = 0.8;
export const HEAT_RGB: readonly [number, number, number] = [204, 41, 54];

export function attentionOpacity(attention: number, maxAttention: number): number {
  if (maxAttention <= 0) return 0;
  const ratio = attention / maxAttention;
  return Math.max(0, Math.min(1, ratio)) * MAX_OPACITY;
}

export function attentionColor(attention: number, maxAttention: number): string {
  const [r, g, b] = HEAT_RGB;
  return `rgba(${r}, ${g}, ${b}, ${attentionOpacity(attention, maxAttention).toFixed(4)})`;
}

export function maxAttention(features: GeoJsonFeature[]): number {
  let max = 0;
  for (const f of features) max = Math.max(max, f.properties.attention);
  return max;
}

/** Screen-space rectangle of a feature's square patch ring under `vp`. */
export function featureScreenRect(
  vp: Viewport,
  feature: GeoJsonFeature,
): { x: number; y: number; w: number; h: number } {
  const ring = feature.geometry.coordinates[0]!;
  const [x0, y0] = ring[0]!;
  const [x1, y1] = ring[2]!; // opposite corner of the square
  const a: Point = level0ToScreen(vp, { x: x0!, y: y0! });
  const b: Point = level0ToScreen(vp, { x: x1!, y: y1! });
  return { x: a.x, y: a.y, w: b.x - a.x, h: b.y - a.y };
}

/** Evenly spaced legend stops from transparent to the maximum opacity. */
export function legendStops(
  maxValue: number,
  count = 5,
): { value: number; color: string }[] {
  const stops = [];
  for (let i = 0; i < count; i++) {
    const value = count === 1 ? maxValue : (i / (count - 1)) * maxValue;
    stops.push({ value, color: attentionColor(value, maxValue) });
  }
  return stops;
}
