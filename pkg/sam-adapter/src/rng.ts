/** Small deterministic PRNG (mulberry32) so checkpoint initialization is
 * reproducible across platforms without relying on tfjs's global RNG. */

export type Rng = () => number;

export function mulberry32(seed: number): Rng {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform in [-limit, limit), the classic fan-in scaled init. */
export function uniformInit(rng: Rng, size: number, fanIn: number): Float32Array {
  const limit = Math.sqrt(3.0 / fanIn);
  const out = new Float32Array(size);
  for (let i = 0; i < size; i++) out[i] = (2 * rng() - 1) * limit;
  return out;
}
