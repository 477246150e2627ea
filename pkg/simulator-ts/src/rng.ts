/**
 * Deterministic RNG for the simulator: splitmix64 over BigInt, with
 * Box-Muller for normals.  The protocol only promises determinism per
 * request, not bit-equality with any other implementation, so a small
 * well-understood generator is enough.
 */

const MASK64 = (1n << 64n) - 1n;

export class SplitMix64 {
  private state: bigint;
  private spare: number | null = null;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  /** Derive an independent stream for (seed, index) without consuming
   *  this generator's state. */
  static forElement(seed: number, element: number): SplitMix64 {
    // mix the element index in with a couple of warm-up steps so streams
    // for adjacent elements decorrelate immediately
    const g = new SplitMix64(
      (BigInt(seed) ^ (BigInt(element) * 0x9e3779b97f4a7c15n)) & MASK64,
    );
    g.nextU64();
    g.nextU64();
    return g;
  }

  nextU64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform in [0, 1) from the 53 high bits. */
  uniform(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** Standard normal via Box-Muller; one uniform pair yields two draws. */
  normal(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u1 = this.uniform();
    const u2 = this.uniform();
    if (u1 === 0) u1 = Number.MIN_VALUE;
    const r = Math.sqrt(-2 * Math.log(u1));
    this.spare = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  }

  normals(n: number): number[] {
    const out = new Array<number>(n);
    for (let i = 0; i < n; i++) out[i] = this.normal();
    return out;
  }
}
