/**
 * Pixel-level drawing helpers, kept DOM-free (they fill RGBA buffers) so the
 * views can be tested without a browser. The app layer blits the buffers
 * into canvases.
 */

import { CompositeFrame, CostmapFrame, StateMsg, costmapValueAt } from "./protocol.js";

/** Heat colormap for cost 0..100: black -> red -> orange -> yellow. */
export function heatColor(value: number): [number, number, number] {
  const v = Math.max(0, Math.min(100, value)) / 100;
  const r = Math.min(1, v * 3);
  const g = Math.min(1, Math.max(0, v * 3 - 1));
  const b = Math.min(1, Math.max(0, v * 3 - 2));
  return [Math.round(r * 255), Math.round(g * 255), Math.round(b * 255)];
}

export type RgbaBuffer = Uint8ClampedArray<ArrayBuffer>;

export function compositeToRgba(frame: CompositeFrame): RgbaBuffer {
  const out = new Uint8ClampedArray(new ArrayBuffer(frame.width * frame.height * 4));
  for (let i = 0; i < frame.width * frame.height; i++) {
    out[i * 4] = frame.pixels[i * 3];
    out[i * 4 + 1] = frame.pixels[i * 3 + 1];
    out[i * 4 + 2] = frame.pixels[i * 3 + 2];
    out[i * 4 + 3] = 255;
  }
  return out;
}

/**
 * Top-down view: costmap raster with y up, scaled `scale` pixels per cell.
 * Returns an RGBA buffer of size (width*scale) x (height*scale).
 */
export function costmapToRgba(cm: CostmapFrame, scale = 1): RgbaBuffer {
  const w = cm.width * scale;
  const h = cm.height * scale;
  const out = new Uint8ClampedArray(new ArrayBuffer(w * h * 4));
  for (let py = 0; py < h; py++) {
    const iy = cm.height - 1 - Math.floor(py / scale); // y axis points up
    for (let px = 0; px < w; px++) {
      const ix = Math.floor(px / scale);
      const [r, g, b] = heatColor(costmapValueAt(cm, ix, iy));
      const o = (py * w + px) * 4;
      out[o] = r;
      out[o + 1] = g;
      out[o + 2] = b;
      out[o + 3] = 255;
    }
  }
  return out;
}

export interface OverlayPoint {
  xPx: number;
  yPx: number;
  kind: "robot" | "goal" | "fire";
}

/** Map world positions to pixel coordinates on the top-down raster. */
export function overlayPoints(state: StateMsg, cm: CostmapFrame,
                              scale = 1): OverlayPoint[] {
  const toPx = (x: number, y: number): [number, number] => {
    const ix = (x - cm.origin[0]) / cm.resolution;
    const iy = (y - cm.origin[1]) / cm.resolution;
    return [ix * scale, (cm.height - iy) * scale];
  };
  const pts: OverlayPoint[] = [];
  const [rx, ry] = toPx(state.odom.x, state.odom.y);
  pts.push({ xPx: rx, yPx: ry, kind: "robot" });
  const [gx, gy] = toPx(state.goal[0], state.goal[1]);
  pts.push({ xPx: gx, yPx: gy, kind: "goal" });
  for (const f of state.fires) {
    const [fx, fy] = toPx(f.x, f.y);
    pts.push({ xPx: fx, yPx: fy, kind: "fire" });
  }
  return pts;
}
