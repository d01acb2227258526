/** Viewport math: screen px <-> level-0 slide px, level choice, tile ranges.
 *
 * A viewport is a window onto the slide described by the level-0 point at its
 * center and a zoom factor in screen pixels per level-0 pixel (zoom 1 shows
 * the slide at native resolution; zoom 0.1 shows it 10x reduced).
 */

import type { LevelInfo, Point, SlideInfo } from "./types.js";

export interface Viewport {
  centerX: number;
  centerY: number;
  zoom: number;
  width: number;
  height: number;
}

export function level0ToScreen(vp: Viewport, p: Point): Point {
  return {
    x: (p.x - vp.centerX) * vp.zoom + vp.width / 2,
    y: (p.y - vp.centerY) * vp.zoom + vp.height / 2,
  };
}

export function screenToLevel0(vp: Viewport, p: Point): Point {
  return {
    x: (p.x - vp.width / 2) / vp.zoom + vp.centerX,
    y: (p.y - vp.height / 2) / vp.zoom + vp.centerY,
  };
}

/** Initial view: whole slide visible, centered, largest zoom that fits. */
export function fitViewport(slide: SlideInfo, width: number, height: number): Viewport {
  return {
    centerX: slide.width / 2,
    centerY: slide.height / 2,
    zoom: Math.min(width / slide.width, height / slide.height),
    width,
    height,
  };
}

export function panBy(vp: Viewport, dxScreen: number, dyScreen: number): Viewport {
  return {
    ...vp,
    centerX: vp.centerX - dxScreen / vp.zoom,
    centerY: vp.centerY - dyScreen / vp.zoom,
  };
}

/** Zoom by `factor` keeping the slide point under (sx, sy) fixed on screen. */
export function zoomAt(vp: Viewport, factor: number, sx: number, sy: number): Viewport {
  const anchor = screenToLevel0(vp, { x: sx, y: sy });
  const zoom = vp.zoom * factor;
  return {
    ...vp,
    zoom,
    centerX: anchor.x - (sx - vp.width / 2) / zoom,
    centerY: anchor.y - (sy - vp.height / 2) / zoom,
  };
}

/** Pick the coarsest pyramid level that still meets the zoom's detail need.
 *
 * Rendering at `zoom` needs one source pixel per 1/zoom level-0 pixels, so
 * the chosen level is the one with the largest downsample <= 1/zoom.  Fully
 * zoomed in (zoom >= 1) that is always level 0.
 */
export function levelForZoom(levels: LevelInfo[], zoom: number): LevelInfo {
  const target = 1 / zoom;
  let best = levels[0]!;
  for (const level of levels) {
    if (level.downsample <= target && level.downsample > best.downsample) {
      best = level;
    }
  }
  return best;
}

export interface TileRange {
  level: number;
  txMin: number;
  txMax: number;
  tyMin: number;
  tyMax: number;
}

/** Inclusive tile-index range of `level` intersecting the viewport. */
export function visibleTiles(vp: Viewport, level: LevelInfo, tileSize: number): TileRange {
  const topLeft = screenToLevel0(vp, { x: 0, y: 0 });
  const bottomRight = screenToLevel0(vp, { x: vp.width, y: vp.height });
  const x0 = topLeft.x / level.downsample;
  const y0 = topLeft.y / level.downsample;
  const x1 = bottomRight.x / level.downsample;
  const y1 = bottomRight.y / level.downsample;
  const lastTx = Math.ceil(level.width / tileSize) - 1;
  const lastTy = Math.ceil(level.height / tileSize) - 1;
  return {
    level: level.index,
    txMin: Math.max(0, Math.floor(x0 / tileSize)),
    txMax: Math.min(lastTx, Math.floor((x1 - 1e-9) / tileSize)),
    tyMin: Math.max(0, Math.floor(y0 / tileSize)),
    tyMax: Math.min(lastTy, Math.floor((y1 - 1e-9) / tileSize)),
  };
}

/** Screen rectangle covered by tile (tx, ty) of `level` under `vp`. */
export function tileScreenRect(
  vp: Viewport,
  level: LevelInfo,
  tileSize: number,
  tx: number,
  ty: number,
): { x: number; y: number; w: number; h: number } {
  const origin = level0ToScreen(vp, {
    x: tx * tileSize * level.downsample,
    y: ty * tileSize * level.downsample,
  });
  const size = tileSize * level.downsample * vp.zoom;
  return { x: origin.x, y: origin.y, w: size, h: size };
}
