/**
 * Wire protocol between the teleop server and this client.
 *
 * Text frames are JSON state snapshots. Binary frames carry a one-byte type
 * tag: 0x01 composited camera image (u32 width, u32 height, then RGB24),
 * 0x02 thermal costmap in the occupancy-grid layout ("OGRD" magic, f64
 * stamp, u16 frame-id length + utf-8, f64 resolution, u32 width/height,
 * 2*f64 origin, then width*height int8 values row-major by y).
 */

export const FRAME_COMPOSITE = 0x01;
export const FRAME_COSTMAP = 0x02;

export interface StateMsg {
  type: "state";
  odom: { x: number; y: number; heading: number };
  odom_stale: boolean;
  sensors: Record<string, number>;
  sensors_stale: boolean;
  recording: boolean;
  demo_count: number;
  last_demo: { file: string; valid: boolean; samples: number } | null;
  goal: [number, number];
  start: [number, number];
  domain: [number, number];
  fires: { x: number; y: number; r: number }[];
}

export interface CompositeFrame {
  kind: "composite";
  width: number;
  height: number;
  /** RGB24, row-major from the top row. */
  pixels: Uint8Array;
}

export interface CostmapFrame {
  kind: "costmap";
  stamp: number;
  frameId: string;
  resolution: number;
  width: number;
  height: number;
  origin: [number, number];
  /** cost values 0..100, indexed [ix][iy] via valueAt. */
  values: Int8Array;
}

export class ProtocolError extends Error {}

export function parseState(text: string): StateMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null; // malformed frame: drop, caller counts it
  }
  const msg = data as StateMsg;
  if (!msg || msg.type !== "state" || typeof msg.odom !== "object") return null;
  return msg;
}

export function parseBinaryFrame(buf: ArrayBuffer): CompositeFrame | CostmapFrame {
  const view = new DataView(buf);
  if (buf.byteLength < 1) throw new ProtocolError("empty frame");
  const tag = view.getUint8(0);
  if (tag === FRAME_COMPOSITE) return parseComposite(view, buf);
  if (tag === FRAME_COSTMAP) return parseCostmap(buf.slice(1));
  throw new ProtocolError(`unknown frame tag ${tag}`);
}

function parseComposite(view: DataView, buf: ArrayBuffer): CompositeFrame {
  if (buf.byteLength < 9) throw new ProtocolError("truncated composite header");
  const width = view.getUint32(1, true);
  const height = view.getUint32(5, true);
  const pixels = new Uint8Array(buf, 9);
  if (pixels.length !== width * height * 3) {
    throw new ProtocolError(
      `composite payload ${pixels.length} != ${width}x${height}x3`);
  }
  return { kind: "composite", width, height, pixels };
}

export function parseCostmap(buf: ArrayBuffer): CostmapFrame {
  const view = new DataView(buf);
  if (buf.byteLength < 14) throw new ProtocolError("truncated costmap header");
  const magic = new TextDecoder().decode(new Uint8Array(buf, 0, 4));
  if (magic !== "OGRD") throw new ProtocolError(`bad costmap magic ${magic}`);
  const stamp = view.getFloat64(4, true);
  const fidLen = view.getUint16(12, true);
  let off = 14;
  const frameId = new TextDecoder().decode(new Uint8Array(buf, off, fidLen));
  off += fidLen;
  const resolution = view.getFloat64(off, true);
  const width = view.getUint32(off + 8, true);
  const height = view.getUint32(off + 12, true);
  const ox = view.getFloat64(off + 16, true);
  const oy = view.getFloat64(off + 24, true);
  off += 32;
  const values = new Int8Array(buf, off);
  if (values.length !== width * height) {
    throw new ProtocolError(`costmap data ${values.length} != ${width * height}`);
  }
  return {
    kind: "costmap", stamp, frameId, resolution, width, height,
    origin: [ox, oy], values,
  };
}

/** Cost value at cell (ix, iy); data is row-major by y rows. */
export function costmapValueAt(cm: CostmapFrame, ix: number, iy: number): number {
  return cm.values[iy * cm.width + ix];
}

export function steerMessage(degrees: number): string {
  return JSON.stringify({ type: "steer", degrees });
}

export function recordMessage(action: "start" | "stop"): string {
  return JSON.stringify({ type: "record", action });
}

/**
 * Keyboard steering: held keys ramp the angle toward +-90 degrees at a
 * configurable slew rate; releasing decays back to zero at the same rate.
 * Left steers positive (toward +y in the robot frame), right negative.
 */
export class SteeringRamp {
  degrees = 0;
  left = false;
  right = false;

  constructor(public slewDegPerS = 90.0, public maxDeg = 90.0) {}

  setKeys(left: boolean, right: boolean): void {
    this.left = left;
    this.right = right;
  }

  /** Advance the ramp by dt seconds and return the current angle. */
  tick(dt: number): number {
    const step = this.slewDegPerS * dt;
    if (this.left !== this.right) {
      this.degrees += this.left ? step : -step;
    } else if (this.degrees > 0) {
      this.degrees = Math.max(0, this.degrees - step);
    } else if (this.degrees < 0) {
      this.degrees = Math.min(0, this.degrees + step);
    }
    this.degrees = Math.max(-this.maxDeg, Math.min(this.maxDeg, this.degrees));
    return this.degrees;
  }
}
