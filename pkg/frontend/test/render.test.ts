import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { CostmapFrame, parseBinaryFrame, StateMsg } from "../src/protocol.js";
import { compositeToRgba, costmapToRgba, heatColor, overlayPoints } from "../src/render.js";

function fixture(name: string): ArrayBuffer {
  const buf = readFileSync(join(__dirname, "fixtures", name));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

describe("heat colormap", () => {
  it("is monotone dark to bright and bounded", () => {
    let prev = -1;
    for (const v of [0, 10, 35, 60, 90, 100]) {
      const [r, g, b] = heatColor(v);
      const sum = r + g + b;
      expect(sum).toBeGreaterThanOrEqual(prev);
      prev = sum;
      for (const c of [r, g, b]) {
        expect(c).toBeGreaterThanOrEqual(0);
        expect(c).toBeLessThanOrEqual(255);
      }
    }
    expect(heatColor(0)).toEqual([0, 0, 0]);
    expect(heatColor(100)).toEqual([255, 255, 255]);
  });
});

describe("rasters", () => {
  it("converts composites to opaque RGBA", () => {
    const frame = parseBinaryFrame(fixture("composite.bin"));
    if (frame.kind !== "composite") throw new Error("wrong kind");
    const rgba = compositeToRgba(frame);
    expect(rgba.length).toBe(frame.width * frame.height * 4);
    expect(rgba[3]).toBe(255);
    expect(rgba[0]).toBe(frame.pixels[0]);
  });

  it("scales the costmap raster and flips y up", () => {
    const cm = parseBinaryFrame(fixture("costmap.bin")) as CostmapFrame;
    const rgba = costmapToRgba(cm, 3);
    expect(rgba.length).toBe(cm.width * 3 * cm.height * 3 * 4);
  });
});

describe("overlay mapping", () => {
  it("maps world points into raster pixels", () => {
    const cm = parseBinaryFrame(fixture("costmap.bin")) as CostmapFrame;
    const state: StateMsg = {
      type: "state",
      odom: { x: cm.origin[0] + cm.resolution, y: cm.origin[1] + cm.resolution, heading: 0 },
      odom_stale: false, sensors: {}, sensors_stale: false, recording: false,
      demo_count: 0, last_demo: null, goal: [cm.origin[0], cm.origin[1]],
      start: [0, 0], domain: [2, 1.2], fires: [],
    };
    const pts = overlayPoints(state, cm, 2);
    const robot = pts.find((p) => p.kind === "robot")!;
    expect(robot.xPx).toBeCloseTo(2, 6);
    expect(robot.yPx).toBeCloseTo((cm.height - 1) * 2, 6);
    const goal = pts.find((p) => p.kind === "goal")!;
    expect(goal.xPx).toBeCloseTo(0, 6);
    expect(goal.yPx).toBeCloseTo(cm.height * 2, 6);
  });
});
