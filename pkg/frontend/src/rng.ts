/**
 * PCG32 (PCG-XSH-RR) with the exact stream the server uses for grain
 * placement, so both sides regenerate identical layouts from one seed.
 */

const MASK64 = (1n << 64n) - 1n;
const MULT = 6364136223846793005n;
export const DEFAULT_STREAM = 54;

export class Pcg32 {
  private state: bigint;
  private readonly inc: bigint;

  constructor(seed: number | bigint, stream: number | bigint = DEFAULT_STREAM) {
    this.inc = ((BigInt(stream) << 1n) | 1n) & MASK64;
    this.state = 0n;
    this.nextU32();
    this.state = (this.state + (BigInt(seed) & MASK64)) & MASK64;
    this.nextU32();
  }

  nextU32(): number {
    const old = this.state;
    this.state = (old * MULT + this.inc) & MASK64;
    const xorshifted = Number((((old >> 18n) ^ old) >> 27n) & 0xffffffffn);
    const rot = Number(old >> 59n);
    return ((xorshifted >>> rot) | (xorshifted << ((32 - rot) & 31))) >>> 0;
  }

  /** Float in [0, 1) with 32-bit resolution. */
  uniform(): number {
    return this.nextU32() / 4294967296.0;
  }
}

/** FNV-1a 32-bit over an ASCII string; the grain-layout checksum hash. */
export function fnv1a32(text: string): number {
  let h = 2166136261;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    // 32-bit modular multiply by 16777619 without BigInt.
    h = (Math.imul(h, 16777619)) >>> 0;
  }
  return h >>> 0;
}

export function checksumHex(h: number): string {
  return h.toString(16).padStart(8, "0");
}
