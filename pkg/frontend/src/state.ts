/**
 * Client session state: latest-value mirrors of the server streams plus
 * connection/staleness bookkeeping. Pure of DOM concerns so it is testable
 * headless; the app layer renders from it.
 */

import { CompositeFrame, CostmapFrame, StateMsg } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "retrying";

export const STALE_AFTER_MS = 1000;

export class SessionState {
  status: ConnectionStatus = "connecting";
  state: StateMsg | null = null;
  composite: CompositeFrame | null = null;
  costmap: CostmapFrame | null = null;
  steering = 0;
  recording = false;
  demoCount = 0;
  errorCount = 0;
  retryDelayMs = 500;
  private lastStateAt = -Infinity;

  onConnected(nowMs: number): void {
    this.status = "connected";
    this.retryDelayMs = 500;
    this.lastStateAt = nowMs;
  }

  onDisconnected(): number {
    this.status = "retrying";
    const delay = this.retryDelayMs;
    this.retryDelayMs = Math.min(this.retryDelayMs * 2, 8000);
    return delay;
  }

  onState(msg: StateMsg, nowMs: number): void {
    this.state = msg;
    this.recording = msg.recording;
    this.demoCount = msg.demo_count;
    this.lastStateAt = nowMs;
  }

  onComposite(frame: CompositeFrame): void {
    this.composite = frame;
  }

  onCostmap(frame: CostmapFrame): void {
    this.costmap = frame;
  }

  onBadFrame(): void {
    this.errorCount += 1;
  }

  /** True when the server has gone quiet or flags its own data stale. */
  isStale(nowMs: number): boolean {
    if (this.status !== "connected") return true;
    if (nowMs - this.lastStateAt > STALE_AFTER_MS) return true;
    return this.state !== null && (this.state.sensors_stale || this.state.odom_stale);
  }
}
