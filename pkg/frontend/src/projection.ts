/**
 * Client-side perspective reprojection of equirectangular frames.
 *
 * Mirrors the server pipeline exactly: pixel -> unit direction on the
 * z=1 plane -> pitch-then-yaw rotation (fixed axes) -> spherical
 * lookup with longitude/latitude normalized to [-1, 1] -> Catmull-Rom
 * 4x4 resampling with horizontal wrap and vertical clamp.  Image y
 * grows downward; positive pitch looks up; yaw +90 looks toward the
 * 3/4-width column of the frame.
 */

export interface ViewportSpec {
  yawDeg: number;
  pitchDeg: number;
  hfovDeg: number;
  widthPx: number;
  heightPx: number;
}

export interface PixelMap {
  x: Float64Array; // row-major source column coordinates
  y: Float64Array; // row-major source row coordinates
  width: number;
  height: number;
  eqWidth: number;
  eqHeight: number;
}

export interface RasterImage {
  data: Uint8Array | Uint8ClampedArray;
  width: number;
  height: number;
  channels: number; // 3 (RGB) or 4 (RGBA)
}

export type Mat3 = [number, number, number, number, number, number, number, number, number];

const DEG = Math.PI / 180.0;

export function vfovDeg(vp: ViewportSpec): number {
  return (vp.hfovDeg * vp.heightPx) / vp.widthPx;
}

export function angularRatios(vp: ViewportSpec): [number, number] {
  const wRatio = (2.0 * Math.tan((vp.hfovDeg * DEG) / 2.0)) / vp.widthPx;
  const hRatio = (2.0 * Math.tan((vfovDeg(vp) * DEG) / 2.0)) / vp.heightPx;
  return [wRatio, hRatio];
}

export function pitchMatrix(pitchDeg: number): Mat3 {
  const c = Math.cos(pitchDeg * DEG);
  const s = Math.sin(pitchDeg * DEG);
  return [1, 0, 0, 0, c, -s, 0, s, c];
}

export function yawMatrix(yawDeg: number): Mat3 {
  const c = Math.cos(yawDeg * DEG);
  const s = Math.sin(yawDeg * DEG);
  return [c, 0, s, 0, 1, 0, -s, 0, c];
}

export function rollMatrix(rollDeg: number): Mat3 {
  const c = Math.cos(rollDeg * DEG);
  const s = Math.sin(rollDeg * DEG);
  return [c, -s, 0, s, c, 0, 0, 0, 1];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array(9).fill(0) as Mat3;
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      out[r * 3 + c] = a[r * 3] * b[c] + a[r * 3 + 1] * b[3 + c] + a[r * 3 + 2] * b[6 + c];
    }
  }
  return out;
}

/** Rotation taking head-frame directions into the body/world frame. */
export function headMatrix(yawDeg: number, pitchDeg: number, rollDeg: number): Mat3 {
  return matMul(yawMatrix(yawDeg), matMul(pitchMatrix(pitchDeg), rollMatrix(rollDeg)));
}

export function applyMat(m: Mat3, x: number, y: number, z: number): [number, number, number] {
  return [
    m[0] * x + m[1] * y + m[2] * z,
    m[3] * x + m[4] * y + m[5] * z,
    m[6] * x + m[7] * y + m[8] * z,
  ];
}

export function buildPixelMap(
  vp: ViewportSpec,
  eqWidth: number,
  eqHeight: number,
  rollDeg = 0.0,
): PixelMap {
  const [wRatio, hRatio] = angularRatios(vp);
  const cx = vp.widthPx / 2.0;
  const cy = vp.heightPx / 2.0;
  const rot = rollDeg === 0.0
    ? matMul(yawMatrix(vp.yawDeg), pitchMatrix(vp.pitchDeg))
    : headMatrix(vp.yawDeg, vp.pitchDeg, rollDeg);
  const xs = new Float64Array(vp.widthPx * vp.heightPx);
  const ys = new Float64Array(vp.widthPx * vp.heightPx);
  for (let y = 0; y < vp.heightPx; y++) {
    const py = (y - cy) * hRatio;
    for (let x = 0; x < vp.widthPx; x++) {
      const px = (x - cx) * wRatio;
      const d = Math.sqrt(1.0 + px * px + py * py);
      const [rx, ry, rz] = applyMat(rot, px / d, py / d, 1.0 / d);
      const lat = Math.asin(Math.min(1.0, Math.max(-1.0, ry)));
      const lon = Math.atan2(rx, rz);
      const i = y * vp.widthPx + x;
      xs[i] = ((lon / Math.PI) * (eqWidth / 2.0) + eqWidth / 2.0) % eqWidth;
      ys[i] = Math.min(eqHeight, Math.max(0.0, (lat / (Math.PI / 2.0)) * (eqHeight / 2.0) + eqHeight / 2.0));
    }
  }
  return { x: xs, y: ys, width: vp.widthPx, height: vp.heightPx, eqWidth, eqHeight };
}

/** Round-half-even, matching the server's uint8 quantization. */
export function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

function catmullRomWeights(t: number): [number, number, number, number] {
  const t2 = t * t;
  const t3 = t2 * t;
  return [
    0.5 * (-t3 + 2.0 * t2 - t),
    0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
    0.5 * (-3.0 * t3 + 4.0 * t2 + t),
    0.5 * (t3 - t2),
  ];
}

/**
 * Resample an equirect raster through a pixel map into an RGB buffer.
 * The 4x4 tap neighborhood wraps horizontally and clamps vertically.
 */
export function renderViewport(src: RasterImage, map: PixelMap): Uint8ClampedArray {
  if (src.width !== map.eqWidth || src.height !== map.eqHeight) {
    throw new Error(
      `pixel map built for ${map.eqWidth}x${map.eqHeight}, image is ${src.width}x${src.height}`,
    );
  }
  const { data, width: w, height: h, channels } = src;
  const out = new Uint8ClampedArray(map.width * map.height * 3);
  const n = map.width * map.height;
  for (let i = 0; i < n; i++) {
    const xf = map.x[i];
    const yf = map.y[i];
    const x0 = Math.floor(xf);
    const y0 = Math.floor(yf);
    const wx = catmullRomWeights(xf - x0);
    const wy = catmullRomWeights(yf - y0);
    let r = 0.0;
    let g = 0.0;
    let b = 0.0;
    for (let j = 0; j < 4; j++) {
      const row = Math.min(h - 1, Math.max(0, y0 + j - 1));
      let ar = 0.0;
      let ag = 0.0;
      let ab = 0.0;
      for (let k = 0; k < 4; k++) {
        const col = (((x0 + k - 1) % w) + w) % w;
        const o = (row * w + col) * channels;
        ar += wx[k] * data[o];
        ag += wx[k] * data[o + 1];
        ab += wx[k] * data[o + 2];
      }
      r += wy[j] * ar;
      g += wy[j] * ag;
      b += wy[j] * ab;
    }
    out[i * 3] = roundHalfEven(Math.min(255.0, Math.max(0.0, r)));
    out[i * 3 + 1] = roundHalfEven(Math.min(255.0, Math.max(0.0, g)));
    out[i * 3 + 2] = roundHalfEven(Math.min(255.0, Math.max(0.0, b)));
  }
  return out;
}

/** Pixel position of a body-frame direction inside the current view, or null. */
export function projectIntoView(
  dBody: [number, number, number],
  headInv: Mat3,
  vp: ViewportSpec,
): { x: number; y: number; eccDeg: number } | null {
  const [hx, hy, hz] = applyMat(headInv, dBody[0], dBody[1], dBody[2]);
  if (hz <= 1e-6) return null;
  const [wRatio, hRatio] = angularRatios(vp);
  const x = hx / hz / wRatio + vp.widthPx / 2.0;
  const y = hy / hz / hRatio + vp.heightPx / 2.0;
  const eccDeg = Math.acos(Math.min(1.0, Math.max(-1.0, hz))) / DEG;
  return { x, y, eccDeg };
}

export function transpose(m: Mat3): Mat3 {
  return [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]];
}
