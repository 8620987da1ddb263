/**
 * Viewer application: drag-to-look 360 playback with live EPOF
 * telemetry and the grain overlay composited on top.
 *
 * Data flow per tick: the head publisher streams the current
 * orientation at 60 Hz; every server state reply updates the frame
 * index, the EPOF gauge/sparkline, and the grain opacity.  Frames are
 * fetched by index around the playhead (no streaming codec), and the
 * grain layout is regenerated locally from the manifest seed, verified
 * once against the server's checksum endpoint.
 */

import { drawOpacityBar, drawSparkline } from "./gauge.js";
import { GrainSet, generateGrains, grainChecksum, grainDirections, radialEnvelope } from "./grains.js";
import {
  RasterImage,
  ViewportSpec,
  angularRatios,
  buildPixelMap,
  headMatrix,
  projectIntoView,
  renderViewport,
  transpose,
} from "./projection.js";
import { HeadPublisher, RttTracker, parseServerMessage } from "./protocol.js";
import { ViewState } from "./viewstate.js";

interface ManifestSummary {
  video_id: string;
  n_frames: number;
  fps: number;
  equirect: { width: number; height: number };
  grid: { hfov_deg: number; vfov_deg: number };
  p10: number;
  p90: number;
  grf: {
    grain_size_deg: number;
    density: number;
    ifov_deg: number;
    ofov_deg: number;
    seed: number;
    display_fov_deg: number;
  };
}

const RENDER_W = 480;
const RENDER_H = 360;
const DRAG_DEG_PER_PX = 0.22;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class FrameCache {
  private frames = new Map<number, RasterImage>();
  private loading = new Set<number>();

  constructor(private readonly videoId: string, private readonly maxEntries = 24) {}

  get(idx: number): RasterImage | null {
    return this.frames.get(idx) ?? null;
  }

  prefetch(center: number, nFrames: number, radius = 3): void {
    for (let d = 0; d <= radius; d++) {
      for (const idx of [center + d, center - d]) {
        if (idx >= 0 && idx < nFrames) void this.load(idx);
      }
    }
  }

  private async load(idx: number): Promise<void> {
    if (this.frames.has(idx) || this.loading.has(idx)) return;
    this.loading.add(idx);
    try {
      const resp = await fetch(`/videos/${this.videoId}/frames/${idx}`);
      if (!resp.ok) return;
      const bitmap = await createImageBitmap(await resp.blob());
      const canvas = document.createElement("canvas");
      canvas.width = bitmap.width;
      canvas.height = bitmap.height;
      const ctx = canvas.getContext("2d")!;
      ctx.drawImage(bitmap, 0, 0);
      const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
      if (this.frames.size >= this.maxEntries) {
        const evict = [...this.frames.keys()].sort((a, b) => Math.abs(b - idx) - Math.abs(a - idx))[0];
        this.frames.delete(evict);
      }
      this.frames.set(idx, {
        data: data.data,
        width: bitmap.width,
        height: bitmap.height,
        channels: 4,
      });
    } finally {
      this.loading.delete(idx);
    }
  }
}

class GrainOverlay {
  private readonly dirs: Float64Array;

  constructor(readonly grains: GrainSet) {
    this.dirs = grainDirections(grains);
  }

  draw(ctx: CanvasRenderingContext2D, vp: ViewportSpec, view: ViewState, opacity: number): void {
    ctx.clearRect(0, 0, vp.widthPx, vp.heightPx);
    if (opacity <= 0.0 || this.grains.yawDeg.length === 0) return;
    const headInv = transpose(headMatrix(view.yaw, view.pitch, view.roll));
    const [wRatio] = angularRatios(vp);
    const radiusTan = Math.tan((this.grains.radiusDeg * Math.PI) / 180.0);
    for (let i = 0; i < this.dirs.length / 3; i++) {
      const hit = projectIntoView(
        [this.dirs[i * 3], this.dirs[i * 3 + 1], this.dirs[i * 3 + 2]],
        headInv,
        vp,
      );
      if (!hit) continue;
      const alpha = opacity * radialEnvelope(hit.eccDeg, this.grains.config);
      if (alpha <= 0.003) continue;
      // Grain radius in pixels at this eccentricity (paraxial-ish; the
      // exact per-pixel mask lives server-side for offline rendering).
      const radiusPx = (radiusTan / wRatio) * (1.0 + Math.tan((hit.eccDeg * Math.PI) / 180.0) ** 2);
      if (hit.x < -radiusPx || hit.x > vp.widthPx + radiusPx) continue;
      if (hit.y < -radiusPx || hit.y > vp.heightPx + radiusPx) continue;
      const gradient = ctx.createRadialGradient(hit.x, hit.y, radiusPx * 0.9, hit.x, hit.y, radiusPx);
      gradient.addColorStop(0, `rgba(0,0,0,${alpha.toFixed(3)})`);
      gradient.addColorStop(1, "rgba(0,0,0,0)");
      ctx.fillStyle = gradient;
      ctx.beginPath();
      ctx.arc(hit.x, hit.y, radiusPx, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

async function boot(): Promise<void> {
  const banner = el<HTMLDivElement>("banner");
  const videos = (await (await fetch("/videos")).json()) as { videos: string[] };
  if (videos.videos.length === 0) {
    banner.textContent = "no videos registered on the server";
    return;
  }
  const videoId = videos.videos[0];
  const manifest = (await (await fetch(`/videos/${videoId}/manifest`)).json()) as ManifestSummary;

  const grains = generateGrains(
    {
      grainSizeDeg: manifest.grf.grain_size_deg,
      density: manifest.grf.density,
      ifovDeg: manifest.grf.ifov_deg,
      ofovDeg: manifest.grf.ofov_deg,
      seed: manifest.grf.seed,
    },
    manifest.grf.display_fov_deg,
  );
  const serverGrains = (await (await fetch(`/videos/${videoId}/grains`)).json()) as {
    checksum: string;
    count: number;
  };
  const localSum = grainChecksum(grains);
  const grainBadge = el<HTMLSpanElement>("grain-badge");
  if (localSum === serverGrains.checksum) {
    grainBadge.textContent = `grains ok (${grains.yawDeg.length}, ${localSum})`;
  } else {
    grainBadge.textContent = `grain layout MISMATCH: ${localSum} vs ${serverGrains.checksum}`;
    grainBadge.classList.add("bad");
  }

  const vp: ViewportSpec = {
    yawDeg: 0,
    pitchDeg: 0,
    hfovDeg: manifest.grid.hfov_deg,
    widthPx: RENDER_W,
    heightPx: RENDER_H,
  };
  const view = new ViewState();
  const cache = new FrameCache(videoId);
  const overlay = new GrainOverlay(grains);
  const rtt = new RttTracker();

  const videoCanvas = el<HTMLCanvasElement>("video-canvas");
  const grainCanvas = el<HTMLCanvasElement>("grain-canvas");
  videoCanvas.width = grainCanvas.width = RENDER_W;
  videoCanvas.height = grainCanvas.height = RENDER_H;
  const videoCtx = videoCanvas.getContext("2d")!;
  const grainCtx = grainCanvas.getContext("2d")!;
  const sparkCtx = el<HTMLCanvasElement>("sparkline").getContext("2d")!;
  const opacityCtx = el<HTMLCanvasElement>("opacity-bar").getContext("2d")!;

  let ws: WebSocket | null = null;
  const publisher = new HeadPublisher(
    (msg) => {
      if (!ws || ws.readyState !== WebSocket.OPEN) return false;
      ws.send(JSON.stringify(msg));
      rtt.onSend(msg.t);
      return true;
    },
    () => ({ yaw: view.yaw, pitch: view.pitch, roll: view.roll }),
    60,
  );

  function connect(): void {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    ws = new WebSocket(`${proto}://${location.host}/videos/${videoId}/live`);
    ws.onopen = () => {
      banner.classList.add("hidden");
      rtt.reset();
    };
    ws.onclose = () => {
      banner.textContent = "connection lost, retrying";
      banner.classList.remove("hidden");
      setTimeout(connect, 1000);
    };
    ws.onmessage = (event) => {
      const msg = parseServerMessage(String(event.data));
      if (!msg) return;
      if (msg.type === "error") {
        console.warn("server error:", msg.reason);
        return;
      }
      const now = performance.now() / 1000.0;
      rtt.onReply(now);
      view.applyState(msg, now);
      cache.prefetch(msg.frame_idx, manifest.n_frames);
      updateTelemetry();
    };
  }

  function updateTelemetry(): void {
    const state = view.lastState;
    el<HTMLSpanElement>("epof-value").textContent =
      state === null ? "-" : state.epof.toFixed(2);
    el<HTMLSpanElement>("frame-label").textContent =
      `${view.frameIdx + 1} / ${manifest.n_frames}`;
    const med = rtt.median();
    el<HTMLSpanElement>("rtt-label").textContent =
      med === null ? "-" : `${(med * 1000).toFixed(1)} ms`;
    const windowsDiv = el<HTMLDivElement>("windows");
    if (state) {
      windowsDiv.textContent = state.windows
        .map((w) => `#${w.id} w=${w.weight.toFixed(3)} pof=${w.pof.toFixed(2)}`)
        .join("  ");
    }
    drawOpacityBar(opacityCtx, view.opacity);
    (el<HTMLInputElement>("timeline")).value = String(view.frameIdx);
  }

  // Pointer drag grabs the panorama.
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  videoCanvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    videoCanvas.setPointerCapture(e.pointerId);
  });
  videoCanvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    view.applyDrag(e.clientX - lastX, e.clientY - lastY, DRAG_DEG_PER_PX);
    lastX = e.clientX;
    lastY = e.clientY;
  });
  videoCanvas.addEventListener("pointerup", () => (dragging = false));

  // Arrow keys nudge the view.
  window.addEventListener("keydown", (e) => {
    const step = 3.0;
    if (e.key === "ArrowLeft") view.applyDrag(step / DRAG_DEG_PER_PX, 0, DRAG_DEG_PER_PX);
    if (e.key === "ArrowRight") view.applyDrag(-step / DRAG_DEG_PER_PX, 0, DRAG_DEG_PER_PX);
    if (e.key === "ArrowUp") view.applyDrag(0, step / DRAG_DEG_PER_PX, DRAG_DEG_PER_PX);
    if (e.key === "ArrowDown") view.applyDrag(0, -step / DRAG_DEG_PER_PX, DRAG_DEG_PER_PX);
  });

  const timeline = el<HTMLInputElement>("timeline");
  timeline.max = String(manifest.n_frames - 1);
  timeline.addEventListener("input", () => {
    ws?.send(JSON.stringify({ type: "seek", frame_idx: Number(timeline.value) }));
  });
  el<HTMLButtonElement>("play-pause").addEventListener("click", (e) => {
    view.playing = !view.playing;
    (e.target as HTMLButtonElement).textContent = view.playing ? "pause" : "play";
    ws?.send(JSON.stringify({ type: view.playing ? "play" : "pause" }));
  });

  let lastDrawnKey = "";
  function renderLoop(): void {
    const spark = view.history;
    drawSparkline(sparkCtx, spark, performance.now() / 1000.0, manifest.p90);
    const frame = cache.get(view.frameIdx);
    const key = `${view.frameIdx}|${view.yaw.toFixed(2)}|${view.pitch.toFixed(2)}|${view.opacity.toFixed(3)}`;
    if (frame && key !== lastDrawnKey) {
      lastDrawnKey = key;
      vp.yawDeg = view.yaw;
      vp.pitchDeg = view.pitch;
      const map = buildPixelMap(vp, frame.width, frame.height, view.roll);
      const rgb = renderViewport(frame, map);
      const image = videoCtx.createImageData(RENDER_W, RENDER_H);
      for (let i = 0; i < RENDER_W * RENDER_H; i++) {
        image.data[i * 4] = rgb[i * 3];
        image.data[i * 4 + 1] = rgb[i * 3 + 1];
        image.data[i * 4 + 2] = rgb[i * 3 + 2];
        image.data[i * 4 + 3] = 255;
      }
      videoCtx.putImageData(image, 0, 0);
      overlay.draw(grainCtx, vp, view, view.opacity);
    }
    requestAnimationFrame(renderLoop);
  }

  cache.prefetch(0, manifest.n_frames);
  connect();
  publisher.start();
  requestAnimationFrame(renderLoop);
}

boot().catch((err) => {
  el<HTMLDivElement>("banner").textContent = `viewer failed to start: ${err}`;
});
