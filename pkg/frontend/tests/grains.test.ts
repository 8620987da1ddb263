import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { GrfConfig, generateGrains, grainChecksum, radialEnvelope } from "../src/grains.js";
import { Pcg32 } from "../src/rng.js";

const GOLDEN = join(__dirname, "golden");

interface GrainGolden {
  config: GrfConfig;
  displayFovDeg: number;
  count: number;
  checksum: string;
  realizedCoverage: number;
  firstCenters: [number, number][];
}

const grainGoldens = JSON.parse(
  readFileSync(join(GOLDEN, "grains.json"), "utf-8"),
) as Record<string, GrainGolden>;

describe("PCG32 stream parity", () => {
  const vectors = JSON.parse(readFileSync(join(GOLDEN, "pcg32.json"), "utf-8")) as Record<
    string,
    number[]
  >;
  for (const [seed, expected] of Object.entries(vectors)) {
    it(`seed ${seed} reproduces the reference stream`, () => {
      const rng = new Pcg32(Number(seed));
      const got = expected.map(() => rng.nextU32());
      expect(got).toEqual(expected);
    });
  }
});

describe("grain layout parity with the server", () => {
  for (const [name, golden] of Object.entries(grainGoldens)) {
    it(`'${name}' regenerates the exact layout (count + checksum)`, () => {
      const grains = generateGrains(golden.config, golden.displayFovDeg);
      expect(grains.yawDeg.length).toBe(golden.count);
      expect(grainChecksum(grains)).toBe(golden.checksum);
      expect(grains.realizedCoverage).toBeCloseTo(golden.realizedCoverage, 6);
      for (let i = 0; i < golden.firstCenters.length; i++) {
        expect(grains.yawDeg[i]).toBeCloseTo(golden.firstCenters[i][0], 9);
        expect(grains.pitchDeg[i]).toBeCloseTo(golden.firstCenters[i][1], 9);
      }
    });
  }

  it("is deterministic per seed and distinct across seeds", () => {
    const cfg = grainGoldens.narrow.config;
    const a = generateGrains(cfg, 40.0);
    const b = generateGrains(cfg, 40.0);
    expect(grainChecksum(a)).toBe(grainChecksum(b));
    const c = generateGrains({ ...cfg, seed: cfg.seed + 1 }, 40.0);
    expect(grainChecksum(c)).not.toBe(grainChecksum(a));
  });

  it("rejects an outer FOV beyond the display FOV", () => {
    expect(() => generateGrains(grainGoldens.default107.config, 60.0)).toThrow();
  });

  it("zero density yields an empty set", () => {
    const grains = generateGrains({ ...grainGoldens.default107.config, density: 0 }, 107.0);
    expect(grains.yawDeg.length).toBe(0);
  });
});

describe("radial envelope", () => {
  const cfg: GrfConfig = { grainSizeDeg: 1.5, density: 0.5, ifovDeg: 36, ofovDeg: 80, seed: 0 };
  it("is clear inside half the inner FOV and opaque past half the outer", () => {
    expect(radialEnvelope(10, cfg)).toBe(0);
    expect(radialEnvelope(18, cfg)).toBe(0);
    expect(radialEnvelope(29, cfg)).toBeCloseTo(0.5);
    expect(radialEnvelope(40, cfg)).toBe(1);
    expect(radialEnvelope(70, cfg)).toBe(1);
  });
});
