/** CPU reference ray marcher over decoded block data.
 *
 * This is the same sampling, activation and accumulation the fragment
 * shader performs, written in plain TypeScript: cell-occupancy
 * skipping, trilinear voxel + bilinear plane dequantized sums, clamped
 * exp / sigmoid activations, front-to-back accumulation, per-block
 * deferred shading, depth-ordered compositing. The parity tests hold
 * it against golden frames from the asset pipeline's renderer.
 */

import { BlockData } from "./assets.js";
import { NUM_CHANNELS, densityActivation, dequantTables, sigmoid } from "./codec.js";
import { Camera, Vec3, rayAabb, rayDirection } from "./math.js";
import { Manifest, blockCenter, blockKey } from "./manifest.js";
import { ShaderWeights, evalShader } from "./shading.js";

const EPS_T = 1e-4;

export interface SegmentResult {
  cdiff: [number, number, number];
  feature: [number, number, number, number];
  alpha: number;
}

function cellOccupied(b: BlockData, cx: number, cy: number, cz: number): boolean {
  const [, ry, rz] = b.res;
  const occ = b.occ.levels[0];
  for (let dx = 0; dx < 2; dx++) {
    for (let dy = 0; dy < 2; dy++) {
      for (let dz = 0; dz < 2; dz++) {
        if (occ[((cx + dx) * ry + cy + dy) * rz + cz + dz]) return true;
      }
    }
  }
  return false;
}

function samplePre(
  b: BlockData, dq: Float64Array[], g: Vec3, out: Float64Array,
): void {
  const [rx, ry, rz] = b.res;
  const cx = Math.min(Math.max(Math.floor(g[0]), 0), rx - 2);
  const cy = Math.min(Math.max(Math.floor(g[1]), 0), ry - 2);
  const cz = Math.min(Math.max(Math.floor(g[2]), 0), rz - 2);
  const fx = g[0] - cx;
  const fy = g[1] - cy;
  const fz = g[2] - cz;
  out.fill(0);
  for (let dx = 0; dx < 2; dx++) {
    for (let dy = 0; dy < 2; dy++) {
      for (let dz = 0; dz < 2; dz++) {
        const w =
          (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        const o = (((cx + dx) * ry + cy + dy) * rz + cz + dz) * NUM_CHANNELS;
        for (let c = 0; c < NUM_CHANNELS; c++) {
          out[c] += w * dq[c][b.dense[o + c]];
        }
      }
    }
  }
  const rt = b.triplaneRes;
  const gt: Vec3 = [
    (g[0] * (rt - 1)) / (rx - 1),
    (g[1] * (rt - 1)) / (ry - 1),
    (g[2] * (rt - 1)) / (rz - 1),
  ];
  const axes: Record<string, [number, number]> = { xy: [0, 1], xz: [0, 2], yz: [1, 2] };
  for (const [name, [a0, a1]] of Object.entries(axes)) {
    const plane = b.planes[name];
    const u = Math.min(Math.max(gt[a0], 0), rt - 1);
    const v = Math.min(Math.max(gt[a1], 0), rt - 1);
    const iu = Math.min(Math.max(Math.floor(u), 0), rt - 2);
    const iv = Math.min(Math.max(Math.floor(v), 0), rt - 2);
    const fu = u - iu;
    const fv = v - iv;
    for (let du = 0; du < 2; du++) {
      for (let dv = 0; dv < 2; dv++) {
        const w = (du ? fu : 1 - fu) * (dv ? fv : 1 - fv);
        const o = ((iu + du) * rt + iv + dv) * NUM_CHANNELS;
        for (let c = 0; c < NUM_CHANNELS; c++) {
          out[c] += w * dq[c][plane[o + c]];
        }
      }
    }
  }
}

/** One ray through one block: premultiplied diffuse, feature, opacity. */
export function marchBlock(
  b: BlockData, dq: Float64Array[], origin: Vec3, dir: Vec3,
): SegmentResult & { hit: boolean; entryT: number } {
  const [lo, hi] = b.bounds;
  const [t0, t1] = rayAabb(origin, dir, lo as Vec3, hi as Vec3, 1e-6, Infinity);
  const zero: SegmentResult & { hit: boolean; entryT: number } = {
    cdiff: [0, 0, 0], feature: [0, 0, 0, 0], alpha: 0, hit: false, entryT: Infinity,
  };
  if (!(t1 > t0)) return zero;
  const [rx, ry, rz] = b.res;
  const half = b.unbounded ? 2 : 1;
  const delta = ((hi[0] - lo[0]) * (b.unbounded ? 2 : 1)) / (rx - 1);
  const count = Math.floor((t1 - t0) / delta + 0.5);
  // grid coords are affine inside the box (contraction is identity there)
  const gOf = (t: number, a: number): number => {
    const p = origin[a] + t * dir[a];
    const q = (2 * (p - lo[a])) / (hi[a] - lo[a]) - 1;
    return ((q + half) / (2 * half)) * ([rx, ry, rz][a] - 1);
  };
  const pre = new Float64Array(NUM_CHANNELS);
  let trans = 1;
  const cdiff: [number, number, number] = [0, 0, 0];
  const feature: [number, number, number, number] = [0, 0, 0, 0];
  let acc = 0;
  for (let i = 0; i < count && trans > EPS_T; i++) {
    const t = t0 + (i + 0.5) * delta;
    const g: Vec3 = [
      Math.min(Math.max(gOf(t, 0), 0), rx - 1),
      Math.min(Math.max(gOf(t, 1), 0), ry - 1),
      Math.min(Math.max(gOf(t, 2), 0), rz - 1),
    ];
    const cx = Math.min(Math.max(Math.floor(g[0]), 0), rx - 2);
    const cy = Math.min(Math.max(Math.floor(g[1]), 0), ry - 2);
    const cz = Math.min(Math.max(Math.floor(g[2]), 0), rz - 2);
    if (!cellOccupied(b, cx, cy, cz)) continue;
    samplePre(b, dq, g, pre);
    const sigma = densityActivation(pre[0]);
    const alpha = 1 - Math.exp(-sigma * delta);
    const w = trans * alpha;
    for (let c = 0; c < 3; c++) cdiff[c] += w * sigmoid(pre[1 + c]);
    for (let c = 0; c < 4; c++) feature[c] += w * sigmoid(pre[4 + c]);
    acc += w;
    trans *= 1 - alpha;
  }
  return { cdiff, feature, alpha: acc, hit: count > 0, entryT: t0 };
}

export interface CpuScene {
  manifest: Manifest;
  blocks: Map<string, BlockData>;
  weights: Map<string, ShaderWeights>;
  groupOf: Map<string, string>;
}

/** Full-frame reference render: depth-sorted per-block shade + composite. */
export function renderFrame(cam: Camera, scene: CpuScene): {
  rgb: Float64Array; alpha: Float64Array;
} {
  const m = scene.manifest;
  const dq = dequantTables(m.quantization);
  const order = [...scene.blocks.keys()].sort((ka, kb) => {
    const a = keyDepth(scene, cam, ka);
    const b = keyDepth(scene, cam, kb);
    for (let i = 0; i < 4; i++) {
      if (a[i] !== b[i]) return a[i] < b[i] ? -1 : 1;
    }
    return 0;
  });
  const w = cam.width;
  const h = cam.height;
  const rgb = new Float64Array(w * h * 3);
  const alpha = new Float64Array(w * h);
  const bg = m.background;
  for (let py = 0; py < h; py++) {
    for (let px = 0; px < w; px++) {
      const dir = rayDirection(cam, px, py);
      let trans = 1;
      let acc = 0;
      const color = [0, 0, 0];
      for (const key of order) {
        if (trans <= EPS_T) break;
        const block = scene.blocks.get(key)!;
        const seg = marchBlock(block, dq, cam.eye, dir);
        if (!seg.hit || (seg.alpha === 0 && seg.cdiff.every((v) => v === 0))) {
          continue;
        }
        const group = scene.groupOf.get(key) ?? "global";
        const weights = scene.weights.get(group);
        let shaded = seg.cdiff;
        if (weights) {
          const res = evalShader(weights, seg.cdiff, seg.feature, dir);
          shaded = [
            Math.min(Math.max(seg.cdiff[0] + res[0], 0), 1),
            Math.min(Math.max(seg.cdiff[1] + res[1], 0), 1),
            Math.min(Math.max(seg.cdiff[2] + res[2], 0), 1),
          ];
        }
        for (let c = 0; c < 3; c++) color[c] += trans * shaded[c];
        acc += trans * seg.alpha;
        trans *= 1 - seg.alpha;
      }
      const o = (py * w + px) * 3;
      const bgw = Math.max(1 - acc, 0);
      rgb[o] = color[0] + bgw * bg[0];
      rgb[o + 1] = color[1] + bgw * bg[1];
      rgb[o + 2] = color[2] + bgw * bg[2];
      alpha[py * w + px] = acc;
    }
  }
  return { rgb, alpha };
}

function keyDepth(scene: CpuScene, cam: Camera, key: string): [number, number, number, number] {
  const b = scene.blocks.get(key)!.block;
  const [cx, cy] = blockCenter(scene.manifest.layout, b);
  return [Math.hypot(cx - cam.eye[0], cy - cam.eye[1]), b.lod, b.iy, b.ix];
}

export function sceneBlockKey(b: BlockData): string {
  return blockKey(b.block);
}
