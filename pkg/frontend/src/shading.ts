/** The view-dependent residual network: a 3-layer MLP over accumulated
 * diffuse color, specular feature and a sin/cos direction encoding.
 * The GLSL shader evaluates the identical network; this module is the
 * reference used for parity tests and the post-composite CPU path.
 */

import { Vec3 } from "./math.js";

export interface ShaderWeights {
  w0: number[][];
  b0: number[];
  w1: number[][];
  b1: number[];
  w2: number[][];
  b2: number[];
  freq_bands: number;
}

export function positionalEncoding(d: Vec3, bands: number): number[] {
  const out: number[] = [];
  for (let b = 0; b < bands; b++) {
    const s = 1 << b;
    out.push(Math.sin(s * d[0]), Math.sin(s * d[1]), Math.sin(s * d[2]));
    out.push(Math.cos(s * d[0]), Math.cos(s * d[1]), Math.cos(s * d[2]));
  }
  return out;
}

export function evalShader(
  w: ShaderWeights, cdiff: number[], feature: number[], dir: Vec3,
): [number, number, number] {
  const x = [...cdiff, ...feature, ...positionalEncoding(dir, w.freq_bands)];
  const h0 = new Array<number>(w.b0.length);
  for (let j = 0; j < h0.length; j++) {
    let s = w.b0[j];
    for (let i = 0; i < x.length; i++) s += x[i] * w.w0[i][j];
    h0[j] = Math.max(s, 0);
  }
  const h1 = new Array<number>(w.b1.length);
  for (let j = 0; j < h1.length; j++) {
    let s = w.b1[j];
    for (let i = 0; i < h0.length; i++) s += h0[i] * w.w1[i][j];
    h1[j] = Math.max(s, 0);
  }
  const out: [number, number, number] = [0, 0, 0];
  for (let j = 0; j < 3; j++) {
    let s = w.b2[j];
    for (let i = 0; i < h1.length; i++) s += h1[i] * w.w2[i][j];
    out[j] = s;
  }
  return out;
}

/** Flatten weights into the uniform layout the block shader expects. */
export function flattenWeights(w: ShaderWeights): Float32Array {
  const parts: number[] = [];
  for (const row of w.w0) parts.push(...row);
  parts.push(...w.b0);
  for (const row of w.w1) parts.push(...row);
  parts.push(...w.b1);
  for (const row of w.w2) parts.push(...row);
  parts.push(...w.b2);
  return new Float32Array(parts);
}
