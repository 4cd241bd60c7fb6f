/** Deterministic PRNG (splitmix64-seeded xoshiro-style 32-bit core) with a
 * Box-Muller gaussian. Training runs are bit-reproducible for a seed. */

export class Rng {
  private s0: number;
  private s1: number;
  private spare: number | null = null;

  constructor(seed: number) {
    // splitmix32 to spread the seed
    let x = seed >>> 0;
    const next = () => {
      x = (x + 0x9e3779b9) >>> 0;
      let z = x;
      z ^= z >>> 16;
      z = Math.imul(z, 0x21f0aaad);
      z ^= z >>> 15;
      z = Math.imul(z, 0x735a2d97);
      z ^= z >>> 15;
      return z >>> 0;
    };
    this.s0 = next() || 1;
    this.s1 = next() || 2;
  }

  /** uniform in [0, 1) */
  next(): number {
    // xorshift128-lite on two lanes
    let { s0, s1 } = this;
    const t = (s1 ^ (s1 << 9)) >>> 0;
    s1 = s0;
    s0 = ((s0 ^ (s0 >>> 11)) ^ (t ^ (t >>> 19))) >>> 0;
    this.s0 = s0 || 0x1234567;
    this.s1 = s1;
    return s0 / 4294967296;
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next();
  }

  gaussian(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    do {
      u = this.next();
    } while (u === 0);
    v = this.next();
    const r = Math.sqrt(-2.0 * Math.log(u));
    this.spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  }

  /** Fisher-Yates shuffle of an index array, in place. */
  shuffle(idx: Int32Array): void {
    for (let i = idx.length - 1; i > 0; i--) {
      const j = Math.floor(this.next() * (i + 1));
      const t = idx[i];
      idx[i] = idx[j];
      idx[j] = t;
    }
  }
}
