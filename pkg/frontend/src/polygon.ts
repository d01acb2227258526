/** Client-side polygon checks and GeoJSON conversion for annotation rings.
 *
 * Rings are kept open (no duplicated closure vertex) while editing; the
 * closure is added only when serializing to GeoJSON for submission.
 */

import type { Point } from "./types.js";

function orient(a: Point, b: Point, c: Point): number {
  const v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return v > 0 ? 1 : v < 0 ? -1 : 0;
}

function onSegment(a: Point, b: Point, p: Point): boolean {
  return (
    Math.min(a.x, b.x) <= p.x &&
    p.x <= Math.max(a.x, b.x) &&
    Math.min(a.y, b.y) <= p.y &&
    p.y <= Math.max(a.y, b.y)
  );
}

export function segmentsIntersect(a: Point, b: Point, c: Point, d: Point): boolean {
  const o1 = orient(a, b, c);
  const o2 = orient(a, b, d);
  const o3 = orient(c, d, a);
  const o4 = orient(c, d, b);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(a, b, c)) return true;
  if (o2 === 0 && onSegment(a, b, d)) return true;
  if (o3 === 0 && onSegment(c, d, a)) return true;
  if (o4 === 0 && onSegment(c, d, b)) return true;
  return false;
}

/** True when the open ring has >= 3 vertices and no self-intersection.
 *
 * Adjacent edges share exactly one endpoint; any other contact between two
 * edges (crossing, overlap, touching) makes the ring non-simple.
 */
export function isSimpleRing(ring: Point[]): boolean {
  const n = ring.length;
  if (n < 3) return false;
  for (let i = 0; i < n; i++) {
    const a = ring[i]!;
    const b = ring[(i + 1) % n]!;
    if (a.x === b.x && a.y === b.y) return false; // zero-length edge
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      if (segmentsIntersect(a, b, ring[j]!, ring[(j + 1) % n]!)) return false;
    }
  }
  return true;
}

/** GeoJSON Polygon geometry with the ring closed (first vertex repeated). */
export function toGeoJsonPolygon(ring: Point[]): {
  type: "Polygon";
  coordinates: number[][][];
} {
  const coords = ring.map((p) => [p.x, p.y]);
  const first = ring[0];
  if (first !== undefined) coords.push([first.x, first.y]);
  return { type: "Polygon", coordinates: [coords] };
}
