/**
 * Browser entry point: connects to the teleop server, renders the top-down
 * costmap view and the composited onboard camera, and publishes keyboard
 * steering at 20 Hz. Arrow keys / A-D steer, R toggles recording.
 */

import { parseBinaryFrame, parseState, recordMessage, steerMessage,
         SteeringRamp } from "./protocol.js";
import { compositeToRgba, costmapToRgba, overlayPoints } from "./render.js";
import { SessionState } from "./state.js";

const STEER_RATE_HZ = 20;
const COSTMAP_SCALE = 12;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class TeleopApp {
  private readonly session = new SessionState();
  private readonly ramp = new SteeringRamp();
  private ws: WebSocket | null = null;
  private lastTick = performance.now();

  constructor(private readonly url: string) {}

  start(): void {
    document.addEventListener("keydown", (e) => this.onKey(e, true));
    document.addEventListener("keyup", (e) => this.onKey(e, false));
    this.connect();
    setInterval(() => this.steerTick(), 1000 / STEER_RATE_HZ);
    const draw = () => {
      this.render();
      requestAnimationFrame(draw);
    };
    requestAnimationFrame(draw);
  }

  private connect(): void {
    this.session.status = "connecting";
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => this.session.onConnected(performance.now());
    ws.onmessage = (ev) => this.onMessage(ev);
    ws.onclose = () => {
      const delay = this.session.onDisconnected();
      setTimeout(() => this.connect(), delay);
    };
    ws.onerror = () => ws.close();
    this.ws = ws;
  }

  private onMessage(ev: MessageEvent): void {
    if (typeof ev.data === "string") {
      const msg = parseState(ev.data);
      if (msg === null) {
        this.session.onBadFrame();
        return;
      }
      this.session.onState(msg, performance.now());
      return;
    }
    try {
      const frame = parseBinaryFrame(ev.data as ArrayBuffer);
      if (frame.kind === "composite") this.session.onComposite(frame);
      else this.session.onCostmap(frame);
    } catch {
      this.session.onBadFrame();
    }
  }

  private onKey(ev: KeyboardEvent, down: boolean): void {
    if (ev.repeat) return;
    if (ev.key === "ArrowLeft" || ev.key === "a") {
      this.ramp.setKeys(down, this.ramp.right);
    } else if (ev.key === "ArrowRight" || ev.key === "d") {
      this.ramp.setKeys(this.ramp.left, down);
    } else if (down && (ev.key === "r" || ev.key === "R")) {
      this.toggleRecording();
    }
  }

  private toggleRecording(): void {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return;
    this.ws.send(recordMessage(this.session.recording ? "stop" : "start"));
  }

  private steerTick(): void {
    const now = performance.now();
    const dt = Math.min((now - this.lastTick) / 1000, 0.25);
    this.lastTick = now;
    const deg = this.ramp.tick(dt);
    this.session.steering = deg;
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(steerMessage(deg));
    }
  }

  private render(): void {
    const now = performance.now();
    const badge = el<HTMLSpanElement>("status");
    const stale = this.session.isStale(now);
    badge.textContent = this.session.status === "connected"
      ? (stale ? "STALE" : "LIVE") : this.session.status.toUpperCase();
    badge.className = this.session.status !== "connected" ? "badge off"
      : stale ? "badge stale" : "badge live";

    el<HTMLSpanElement>("steering").textContent =
      `${this.session.steering.toFixed(0)}°`;
    el<HTMLSpanElement>("demos").textContent =
      `${this.session.demoCount} demo(s)` +
      (this.session.state?.last_demo
        ? ` — last: ${this.session.state.last_demo.valid ? "valid" : "invalid"}`
        : "");
    el<HTMLSpanElement>("recording").textContent =
      this.session.recording ? "● REC" : "";

    const cam = el<HTMLCanvasElement>("camera");
    if (this.session.composite) {
      const f = this.session.composite;
      cam.width = f.width;
      cam.height = f.height;
      const ctx = cam.getContext("2d")!;
      ctx.putImageData(new ImageData(compositeToRgba(f), f.width, f.height), 0, 0);
    }

    const map = el<HTMLCanvasElement>("map");
    if (this.session.costmap) {
      const cm = this.session.costmap;
      map.width = cm.width * COSTMAP_SCALE;
      map.height = cm.height * COSTMAP_SCALE;
      const ctx = map.getContext("2d")!;
      ctx.putImageData(new ImageData(costmapToRgba(cm, COSTMAP_SCALE),
                                     map.width, map.height), 0, 0);
      if (this.session.state) {
        for (const p of overlayPoints(this.session.state, cm, COSTMAP_SCALE)) {
          ctx.beginPath();
          ctx.arc(p.xPx, p.yPx, p.kind === "fire" ? 8 : 6, 0, 2 * Math.PI);
          ctx.fillStyle = p.kind === "robot" ? "#4da6ff"
            : p.kind === "goal" ? "#4dff88" : "#ff9933";
          ctx.fill();
          if (p.kind === "robot" && this.session.state.odom) {
            const h = this.session.state.odom.heading;
            ctx.strokeStyle = "#ffffff";
            ctx.beginPath();
            ctx.moveTo(p.xPx, p.yPx);
            ctx.lineTo(p.xPx + 12 * Math.cos(h), p.yPx - 12 * Math.sin(h));
            ctx.stroke();
          }
        }
      }
    }

    const sensors = this.session.state?.sensors;
    if (sensors) {
      el<HTMLSpanElement>("sensors").textContent =
        Object.entries(sensors)
          .map(([k, v]) => `${k} ${v.toFixed(1)}`)
          .join("  ") + " kW/m²";
    }
  }
}

declare global {
  interface Window {
    teleopApp?: TeleopApp;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("camera")) {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("ws")
    ?? `ws://${window.location.hostname || "127.0.0.1"}:8765/teleop`;
  const app = new TeleopApp(url);
  window.teleopApp = app;
  app.start();
}
