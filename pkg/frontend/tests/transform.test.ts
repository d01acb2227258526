import { describe, expect, it } from "vitest";

import {
  fitViewport,
  level0ToScreen,
  levelForZoom,
  panBy,
  screenToLevel0,
  tileScreenRect,
  visibleTiles,
  zoomAt,
  type Viewport,
} from "../src/transform.js";
import type { LevelInfo, SlideInfo } from "../src/types.js";

const levels: LevelInfo[] = [
  { index: 0, width: 2048, height: 2048, downsample: 1 },
  { index: 1, width: 1024, height: 1024, downsample: 2 },
  { index: 2, width: 512, height: 512, downsample: 4 },
];

const slide: SlideInfo = {
  id: "s",
  width: 2048,
  height: 2048,
  mpp_x: null,
  mpp_y: null,
  tile_size: 256,
  levels,
};

describe("fitViewport", () => {
  it("shows the whole slide centered at the largest zoom that fits", () => {
    const vp = fitViewport(slide, 800, 600);
    expect(vp.centerX).toBe(1024);
    expect(vp.centerY).toBe(1024);
    expect(vp.zoom).toBeCloseTo(600 / 2048, 12);
    // all four slide corners land inside the viewport
    for (const corner of [
      { x: 0, y: 0 },
      { x: 2048, y: 0 },
      { x: 0, y: 2048 },
      { x: 2048, y: 2048 },
    ]) {
      const s = level0ToScreen(vp, corner);
      expect(s.x).toBeGreaterThanOrEqual(-1e-9);
      expect(s.x).toBeLessThanOrEqual(800 + 1e-9);
      expect(s.y).toBeGreaterThanOrEqual(-1e-9);
      expect(s.y).toBeLessThanOrEqual(600 + 1e-9);
    }
  });
});

describe("screen/level-0 transform", () => {
  const vp: Viewport = { centerX: 1024, centerY: 512, zoom: 0.25, width: 800, height: 600 };

  it("maps a triangle of known screen points to hand-computed level-0 coords", () => {
    // x = (sx - 400) / 0.25 + 1024, y = (sy - 300) / 0.25 + 512
    const cases: [number, number, number, number][] = [
      [100.5, 50.25, -174, -487],
      [700, 50.25, 2224, -487],
      [400, 550.75, 1024, 1515],
    ];
    for (const [sx, sy, x, y] of cases) {
      const p = screenToLevel0(vp, { x: sx, y: sy });
      expect(p.x).toBeCloseTo(x, 9);
      expect(p.y).toBeCloseTo(y, 9);
    }
  });

  it("round-trips within 1e-9", () => {
    for (const sx of [0, 123.456, 799.999]) {
      for (const sy of [0, 299.5, 600]) {
        const back = level0ToScreen(vp, screenToLevel0(vp, { x: sx, y: sy }));
        expect(back.x).toBeCloseTo(sx, 9);
        expect(back.y).toBeCloseTo(sy, 9);
      }
    }
  });

  it("panBy moves the content with the pointer", () => {
    const before = screenToLevel0(vp, { x: 400, y: 300 });
    const panned = panBy(vp, 50, -30);
    const after = screenToLevel0(panned, { x: 450, y: 270 });
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it("zoomAt keeps the anchor point fixed on screen", () => {
    const anchorBefore = screenToLevel0(vp, { x: 620, y: 80 });
    const zoomed = zoomAt(vp, 1.7, 620, 80);
    const anchorAfter = screenToLevel0(zoomed, { x: 620, y: 80 });
    expect(zoomed.zoom).toBeCloseTo(0.25 * 1.7, 12);
    expect(anchorAfter.x).toBeCloseTo(anchorBefore.x, 9);
    expect(anchorAfter.y).toBeCloseTo(anchorBefore.y, 9);
  });
});

describe("levelForZoom", () => {
  it("chooses the coarsest level with enough detail", () => {
    expect(levelForZoom(levels, 1).index).toBe(0); // max zoom -> level 0
    expect(levelForZoom(levels, 2).index).toBe(0); // beyond native stays level 0
    expect(levelForZoom(levels, 0.5).index).toBe(1);
    expect(levelForZoom(levels, 0.26).index).toBe(1); // ds 4 would be too coarse
    expect(levelForZoom(levels, 0.25).index).toBe(2);
    expect(levelForZoom(levels, 0.01).index).toBe(2); // never coarser than the top
  });
});

describe("visibleTiles", () => {
  it("covers exactly the viewport and clamps to the level grid", () => {
    // zoom 1, 800x600 window centered at (1024, 1024): x in [624, 1424)
    const vp: Viewport = { centerX: 1024, centerY: 1024, zoom: 1, width: 800, height: 600 };
    const range = visibleTiles(vp, levels[0]!, 256);
    expect(range).toEqual({ level: 0, txMin: 2, txMax: 5, tyMin: 2, tyMax: 5 });
  });

  it("clamps when the slide is smaller than the window", () => {
    const vp = fitViewport(slide, 4000, 4000);
    const range = visibleTiles(vp, levels[2]!, 256);
    expect(range).toEqual({ level: 2, txMin: 0, txMax: 1, tyMin: 0, tyMax: 1 });
  });

  it("tileScreenRect tiles abut exactly", () => {
    const vp: Viewport = { centerX: 1000, centerY: 1000, zoom: 0.4, width: 800, height: 600 };
    const a = tileScreenRect(vp, levels[1]!, 256, 1, 1);
    const b = tileScreenRect(vp, levels[1]!, 256, 2, 1);
    expect(a.x + a.w).toBeCloseTo(b.x, 9);
    expect(a.w).toBeCloseTo(256 * 2 * 0.4, 9);
  });
});
