/**
 * Live-channel message types, validation, and the fixed-rate head
 * publisher.  The wire protocol: the client streams head orientations
 * and playback controls; the server answers every message with either
 * a state frame (current frame index, EPOF, opacity, contributing
 * windows) or an error frame.
 */

export interface WindowContribution {
  id: number;
  weight: number;
  pof: number;
}

export interface StateMessage {
  type: "state";
  frame_idx: number;
  epof: number;
  opacity: number;
  windows: WindowContribution[];
}

export interface ErrorMessage {
  type: "error";
  reason: string;
}

export type ServerMessage = StateMessage | ErrorMessage;

export interface HeadMessage {
  type: "head";
  t: number;
  yaw: number;
  pitch: number;
  roll: number;
}

export type ControlMessage =
  | { type: "pause" }
  | { type: "play" }
  | { type: "seek"; frame_idx: number };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as Record<string, unknown>;
  if (msg.type === "error" && typeof msg.reason === "string") {
    return { type: "error", reason: msg.reason };
  }
  if (msg.type !== "state") return null;
  if (!isFiniteNumber(msg.frame_idx) || !isFiniteNumber(msg.epof) || !isFiniteNumber(msg.opacity)) {
    return null;
  }
  if (!Array.isArray(msg.windows)) return null;
  const windows: WindowContribution[] = [];
  for (const w of msg.windows) {
    if (
      typeof w !== "object" || w === null ||
      !isFiniteNumber((w as Record<string, unknown>).id) ||
      !isFiniteNumber((w as Record<string, unknown>).weight) ||
      !isFiniteNumber((w as Record<string, unknown>).pof)
    ) {
      return null;
    }
    windows.push(w as unknown as WindowContribution);
  }
  return {
    type: "state",
    frame_idx: msg.frame_idx as number,
    epof: msg.epof as number,
    opacity: msg.opacity as number,
    windows,
  };
}

export interface Orientation {
  yaw: number;
  pitch: number;
  roll: number;
}

/**
 * Publishes the current orientation at a fixed tick rate with
 * monotonic timestamps.  The driving interval fires at twice the rate
 * and publishes are gated on a due-time grid, so the effective rate
 * stays exact regardless of timer granularity.  While the channel is
 * down, messages are buffered up to one second's worth (drop-oldest
 * beyond that) and flushed on the next successful send.
 */
export class HeadPublisher {
  private buffer: HeadMessage[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastT = -Infinity;
  private nextDue = -Infinity;
  sent = 0;

  constructor(
    private readonly send: (msg: HeadMessage) => boolean,
    private readonly orientation: () => Orientation,
    readonly rateHz = 60,
    private readonly now: () => number = () => performance.now() / 1000.0,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.tick(), 500.0 / this.rateHz);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  tick(): void {
    const t0 = this.now();
    if (t0 < this.nextDue) return;
    const period = 1.0 / this.rateHz;
    // Next slot on the ideal grid; a late wakeup resets the grid rather
    // than bursting stale orientations to catch up.
    this.nextDue = Math.max(
      (Number.isFinite(this.nextDue) ? this.nextDue : t0) + period,
      t0,
    );
    const o = this.orientation();
    // Identical orientations still publish: the server owns the clock
    // and needs a steady stream to answer with fresh frame indices.
    const t = Math.max(t0, this.lastT + 1e-9);
    this.lastT = t;
    const msg: HeadMessage = { type: "head", t, yaw: o.yaw, pitch: o.pitch, roll: o.roll };
    this.buffer.push(msg);
    const limit = Math.max(1, Math.round(this.rateHz));
    if (this.buffer.length > limit) {
      this.buffer.splice(0, this.buffer.length - limit);
    }
    this.flush();
  }

  flush(): void {
    while (this.buffer.length > 0) {
      if (!this.send(this.buffer[0])) return;
      this.buffer.shift();
      this.sent++;
    }
  }

  get buffered(): number {
    return this.buffer.length;
  }
}

/** Pairs sends with in-order replies and tracks round-trip latency. */
export class RttTracker {
  private pending: number[] = [];
  private samples: number[] = [];

  constructor(private readonly maxSamples = 240) {}

  onSend(t: number): void {
    this.pending.push(t);
  }

  onReply(t: number): number | null {
    const sendT = this.pending.shift();
    if (sendT === undefined) return null;
    const rtt = t - sendT;
    this.samples.push(rtt);
    if (this.samples.length > this.maxSamples) this.samples.shift();
    return rtt;
  }

  median(): number | null {
    if (this.samples.length === 0) return null;
    const sorted = [...this.samples].sort((a, b) => a - b);
    return sorted[Math.floor(sorted.length / 2)];
  }

  reset(): void {
    this.pending = [];
  }
}
