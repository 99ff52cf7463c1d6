/**
 * Counter-based SplitMix64 with Box-Muller normals, matching the engine's
 * documented generator constants so streams are reproducible anywhere.
 */

const MASK = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

export function mix64(z: bigint): bigint {
  z &= MASK;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

export function deriveSeed(seed: bigint, tag: bigint): bigint {
  return mix64((seed ^ tag) & MASK);
}

export class CounterRng {
  private state: bigint;
  private count: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK;
    this.count = 0n;
  }

  raw(): bigint {
    this.count += 1n;
    return mix64((this.state + this.count * GOLDEN) & MASK);
  }

  /** Uniform in (0, 1] with 53-bit resolution. */
  uniform(): number {
    return Number((this.raw() >> 11n) + 1n) * 2 ** -53;
  }

  private spare: number | null = null;

  /** Standard normal via Box-Muller pairs. */
  normal(): number {
    if (this.spare !== null) {
      const value = this.spare;
      this.spare = null;
      return value;
    }
    const u1 = this.uniform();
    const u2 = this.uniform();
    const r = Math.sqrt(-2 * Math.log(u1));
    this.spare = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  }

  normals(n: number): Float64Array {
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) out[i] = this.normal();
    return out;
  }
}
