/**
 * Client view state: where the user looks, what the server last said,
 * and the rolling EPOF history behind the sparkline.  Mouse drag grabs
 * the panorama (drag left to look right); pitch clamps at straight up
 * and down while yaw wraps.
 */

import type { StateMessage } from "./protocol.js";

export function wrapYaw(deg: number): number {
  return ((deg + 180.0) % 360.0 + 360.0) % 360.0 - 180.0;
}

export function clampPitch(deg: number): number {
  return Math.min(90.0, Math.max(-90.0, deg));
}

export interface EpofPoint {
  t: number;
  epof: number;
  opacity: number;
}

export class ViewState {
  yaw = 0.0;
  pitch = 0.0;
  roll = 0.0;
  playing = true;
  frameIdx = 0;
  lastState: StateMessage | null = null;
  history: EpofPoint[] = [];

  constructor(readonly historyWindowS = 10.0) {}

  applyDrag(dxPx: number, dyPx: number, degPerPixel: number): void {
    this.yaw = wrapYaw(this.yaw - dxPx * degPerPixel);
    this.pitch = clampPitch(this.pitch + dyPx * degPerPixel);
  }

  applyState(msg: StateMessage, nowS: number): void {
    this.lastState = msg;
    this.frameIdx = msg.frame_idx;
    this.history.push({ t: nowS, epof: msg.epof, opacity: msg.opacity });
    const cutoff = nowS - this.historyWindowS;
    while (this.history.length > 0 && this.history[0].t < cutoff) {
      this.history.shift();
    }
  }

  /** Displayed opacity is always the most recent server value. */
  get opacity(): number {
    return this.lastState ? this.lastState.opacity : 0.0;
  }

  get epof(): number | null {
    return this.lastState ? this.lastState.epof : null;
  }
}
