import { describe, expect, it } from "vitest";

import { formatMs, formatPercent, formatProbs, probsTotalText } from "../src/format.js";

describe("formatPercent", () => {
  it("shows one decimal by default", () => {
    expect(formatPercent(0.8295670906322046)).toBe("83.0%");
    expect(formatPercent(0.17043290936779548)).toBe("17.0%");
    expect(formatPercent(0)).toBe("0.0%");
    expect(formatPercent(1)).toBe("100.0%");
  });

  it("supports other precisions", () => {
    expect(formatPercent(0.12345, 3)).toBe("12.345%");
  });
});

describe("formatProbs", () => {
  it("pairs payload values with class names without altering them", () => {
    const probs = [0.17043290936779548, 0.8295670906322046];
    const rows = formatProbs(probs, ["negative", "positive"]);
    expect(rows.map((r) => r.label)).toEqual(["negative", "positive"]);
    expect(rows.map((r) => r.value)).toEqual(probs); // untouched payload numbers
    expect(rows.map((r) => r.text)).toEqual(["17.0%", "83.0%"]);
  });

  it("invents a label when names run short", () => {
    expect(formatProbs([0.5, 0.5], ["only"])[1]!.label).toBe("class 1");
  });
});

describe("probsTotalText", () => {
  it("displays 100% up to rounding for a softmax output", () => {
    expect(probsTotalText([0.17043290936779548, 0.8295670906322046])).toBe("100.0%");
    expect(probsTotalText([0.5, 0.5])).toBe("100.0%");
  });
});

describe("formatMs", () => {
  it("uses ms below a second and seconds above", () => {
    expect(formatMs(250)).toBe("250 ms");
    expect(formatMs(1250)).toBe("1.25 s");
  });
});
