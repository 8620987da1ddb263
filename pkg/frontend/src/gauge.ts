/**
 * EPOF gauge and sparkline drawing.  The geometry helpers are pure so
 * they can be tested without a canvas; the draw functions are thin.
 */

import type { EpofPoint } from "./viewstate.js";

export interface Scaled {
  xs: number[];
  ys: number[];
}

/** Map the last `windowS` seconds of history onto a w x h box. */
export function sparklinePoints(
  history: EpofPoint[],
  nowS: number,
  w: number,
  h: number,
  windowS = 10.0,
  maxEpof?: number,
): Scaled {
  const xs: number[] = [];
  const ys: number[] = [];
  if (history.length === 0) return { xs, ys };
  const top = maxEpof ?? Math.max(...history.map((p) => p.epof), 1e-9);
  for (const p of history) {
    const age = nowS - p.t;
    if (age > windowS || age < 0) continue;
    xs.push((1.0 - age / windowS) * (w - 1));
    ys.push((1.0 - Math.min(1.0, p.epof / top)) * (h - 1));
  }
  return { xs, ys };
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  history: EpofPoint[],
  nowS: number,
  p90: number,
): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#2a2f3a";
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  const { xs, ys } = sparklinePoints(history, nowS, w, h, 10.0, p90 * 1.2);
  if (xs.length < 2) return;
  ctx.strokeStyle = "#4fd1c5";
  ctx.beginPath();
  ctx.moveTo(xs[0], ys[0]);
  for (let i = 1; i < xs.length; i++) ctx.lineTo(xs[i], ys[i]);
  ctx.stroke();
}

export function drawOpacityBar(ctx: CanvasRenderingContext2D, opacity: number): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#2a2f3a";
  ctx.fillRect(0, 0, w, h);
  ctx.fillStyle = "#f6ad55";
  ctx.fillRect(0, 0, Math.round(w * Math.min(1, Math.max(0, opacity))), h);
}
