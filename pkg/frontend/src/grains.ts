/**
 * Grain-layout generation, bit-compatible with the server.
 *
 * The server sends only a scalar opacity at 90 Hz; the client rebuilds
 * the grain set itself from the manifest's seed and parameters.  Both
 * sides therefore run the identical algorithm: PCG32-driven uniform
 * solid-angle sampling over the annulus between half the inner FOV and
 * half the display FOV, adding grains until the covered fraction of a
 * fixed equal-area lattice reaches the density target.  The layout
 * checksum (FNV-1a over coordinates rounded to 1e-4 degree) lets the
 * client verify agreement against the server's /grains endpoint.
 */

import { Pcg32, checksumHex, fnv1a32 } from "./rng.js";

export const LATTICE_BANDS = 256;
export const LATTICE_SECTORS = 1024;

const DEG = Math.PI / 180.0;

export interface GrfConfig {
  grainSizeDeg: number;
  density: number;
  ifovDeg: number;
  ofovDeg: number;
  seed: number;
}

export interface GrainSet {
  yawDeg: Float64Array;
  pitchDeg: Float64Array;
  radiusDeg: number;
  seed: number;
  realizedCoverage: number;
  displayFovDeg: number;
  config: GrfConfig;
}

export function generateGrains(config: GrfConfig, displayFovDeg: number): GrainSet {
  if (config.ofovDeg > displayFovDeg) {
    throw new Error(`outer FOV ${config.ofovDeg} exceeds display FOV ${displayFovDeg}`);
  }
  const inner = (config.ifovDeg / 2.0) * DEG;
  const outer = (displayFovDeg / 2.0) * DEG;
  const r = (config.grainSizeDeg / 2.0) * DEG;
  const zIn = Math.cos(inner);
  const zOut = Math.cos(outer);

  const empty = (cov: number): GrainSet => ({
    yawDeg: new Float64Array(0),
    pitchDeg: new Float64Array(0),
    radiusDeg: config.grainSizeDeg / 2.0,
    seed: config.seed,
    realizedCoverage: cov,
    displayFovDeg,
    config,
  });
  if (config.density === 0.0) return empty(0.0);

  // Coverage lattice: cell centers in (cos eccentricity, azimuth) space.
  const dz = (zIn - zOut) / LATTICE_BANDS;
  const zC = new Float64Array(LATTICE_BANDS);
  const sinE = new Float64Array(LATTICE_BANDS);
  for (let i = 0; i < LATTICE_BANDS; i++) {
    zC[i] = zOut + (i + 0.5) * dz;
    sinE[i] = Math.sqrt(Math.max(0.0, 1.0 - zC[i] * zC[i]));
  }
  const dpsi = (2.0 * Math.PI) / LATTICE_SECTORS;
  const cosPsi = new Float64Array(LATTICE_SECTORS);
  const sinPsi = new Float64Array(LATTICE_SECTORS);
  for (let j = 0; j < LATTICE_SECTORS; j++) {
    const psi = (j + 0.5) * dpsi;
    cosPsi[j] = Math.cos(psi);
    sinPsi[j] = Math.sin(psi);
  }

  const covered = new Uint8Array(LATTICE_BANDS * LATTICE_SECTORS);
  const total = LATTICE_BANDS * LATTICE_SECTORS;
  const targetCells = Math.ceil(config.density * total);
  const cosR = Math.cos(r);

  const q = (1.0 - Math.cos(r)) / (zIn - zOut);
  const dEff = Math.min(config.density, 0.9999);
  const expected = Math.log(1.0 - dEff) / Math.log(1.0 - q);
  const cap = Math.trunc(50.0 * expected) + 1000;

  const rng = new Pcg32(config.seed);
  const grainYaw: number[] = [];
  const grainPitch: number[] = [];
  let coveredCount = 0;
  while (coveredCount < targetCells && grainYaw.length < cap) {
    const u1 = rng.uniform();
    const u2 = rng.uniform();
    const z = zOut + u1 * (zIn - zOut);
    const psi = 2.0 * Math.PI * u2;
    const sinEg = Math.sqrt(Math.max(0.0, 1.0 - z * z));
    const gx = sinEg * Math.cos(psi);
    const gy = sinEg * Math.sin(psi);
    const gz = z;
    const eG = Math.acos(Math.min(1.0, Math.max(-1.0, z)));

    const zLo = Math.cos(Math.min(eG + r, Math.PI));
    const zHi = Math.cos(Math.max(eG - r, 0.0));
    const i0 = Math.max(0, Math.floor((zLo - zOut) / dz) - 1);
    const i1 = Math.min(LATTICE_BANDS - 1, Math.floor((zHi - zOut) / dz) + 1);

    const sinEdge = Math.sin(Math.max(eG - r, 1e-9));
    let jHalf: number;
    if (sinEdge <= Math.sin(r)) {
      jHalf = LATTICE_SECTORS; // grain straddles the axis: full circle
    } else {
      const half = Math.asin(Math.min(1.0, Math.sin(r) / sinEdge));
      jHalf = Math.ceil(half / dpsi) + 1;
    }
    let jFirst: number;
    let jCount: number;
    if (2 * jHalf + 1 >= LATTICE_SECTORS) {
      jFirst = 0;
      jCount = LATTICE_SECTORS;
    } else {
      jFirst = Math.floor(psi / dpsi) - jHalf;
      jCount = 2 * jHalf + 1;
    }

    for (let i = i0; i <= i1; i++) {
      const se = sinE[i];
      const zc = zC[i];
      const base = i * LATTICE_SECTORS;
      for (let jj = 0; jj < jCount; jj++) {
        const j = (((jFirst + jj) % LATTICE_SECTORS) + LATTICE_SECTORS) % LATTICE_SECTORS;
        const idx = base + j;
        if (covered[idx]) continue;
        const dot = se * (cosPsi[j] * gx + sinPsi[j] * gy) + zc * gz;
        if (dot >= cosR) {
          covered[idx] = 1;
          coveredCount++;
        }
      }
    }

    grainYaw.push(Math.atan2(gx, gz) / DEG);
    grainPitch.push(-Math.asin(Math.min(1.0, Math.max(-1.0, gy))) / DEG);
  }

  return {
    yawDeg: Float64Array.from(grainYaw),
    pitchDeg: Float64Array.from(grainPitch),
    radiusDeg: config.grainSizeDeg / 2.0,
    seed: config.seed,
    realizedCoverage: coveredCount / total,
    displayFovDeg,
    config,
  };
}

/** Portable layout digest; must equal the server's /grains checksum. */
export function grainChecksum(grains: GrainSet): string {
  const parts: string[] = [];
  for (let i = 0; i < grains.yawDeg.length; i++) {
    parts.push(`${(grains.yawDeg[i] + 0.0).toFixed(4)},${(grains.pitchDeg[i] + 0.0).toFixed(4)};`);
  }
  return checksumHex(fnv1a32(parts.join("")));
}

/** Opacity ramp over eccentricity: 0 inside ifov/2, 1 beyond ofov/2. */
export function radialEnvelope(eccentricityDeg: number, config: GrfConfig): number {
  const innerHalf = config.ifovDeg / 2.0;
  const outerHalf = config.ofovDeg / 2.0;
  return Math.min(1.0, Math.max(0.0, (eccentricityDeg - innerHalf) / (outerHalf - innerHalf)));
}

/** Body-frame unit directions of all grains, packed [x0,y0,z0,x1,...]. */
export function grainDirections(grains: GrainSet): Float64Array {
  const out = new Float64Array(grains.yawDeg.length * 3);
  for (let i = 0; i < grains.yawDeg.length; i++) {
    const yaw = grains.yawDeg[i] * DEG;
    const pitch = grains.pitchDeg[i] * DEG;
    out[i * 3] = Math.cos(pitch) * Math.sin(yaw);
    out[i * 3 + 1] = -Math.sin(pitch);
    out[i * 3 + 2] = Math.cos(pitch) * Math.cos(yaw);
  }
  return out;
}
