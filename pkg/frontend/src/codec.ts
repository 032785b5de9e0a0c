/** Texel codec and activations, mirroring the asset pipeline. */

export const NUM_CHANNELS = 8;
export const DENSITY_MAX = 1e4;

export function dequantTables(ranges: [number, number][]): Float64Array[] {
  return ranges.map(([lo, hi]) => {
    const t = new Float64Array(256);
    for (let c = 0; c < 256; c++) t[c] = lo + ((hi - lo) * c) / 255;
    return t;
  });
}

export function densityActivation(x: number): number {
  return Math.min(Math.exp(Math.min(x, Math.log(DENSITY_MAX))), DENSITY_MAX);
}

export function sigmoid(x: number): number {
  if (x >= 0) return 1 / (1 + Math.exp(-x));
  const e = Math.exp(x);
  return e / (1 + e);
}
