/** Client-side streaming policy: the same visibility test, LOD
 * selection, depth sorting and budgeted residency the asset service's
 * `plan` command runs, re-implemented for the browser. The loader
 * parity tests pin this against the server oracle step by step.
 */

import { Camera, project } from "./math.js";
import {
  BlockId,
  Manifest,
  ancestor,
  blockBounds,
  blockCenter,
  blockEntry,
  blockKey,
  blocksAt,
  children,
} from "./manifest.js";

const VISIBILITY_SAMPLES = 17;

export function renderCenter(m: Manifest, b: BlockId): [number, number, number] {
  const [cx, cy] = blockCenter(m.layout, b);
  return [cx, cy, blockEntry(m, b).z_top];
}

/** Conservative visibility of the block's top rectangle. */
export function visible(cam: Camera, b: BlockId, m: Manifest): boolean {
  const [lo, hi] = blockBounds(m.layout, b);
  if (
    lo[0] <= cam.eye[0] && cam.eye[0] <= hi[0] &&
    lo[1] <= cam.eye[1] && cam.eye[1] <= hi[1]
  ) {
    return true;
  }
  const zTop = blockEntry(m, b).z_top;
  const n = VISIBILITY_SAMPLES;
  const corners: [number, number, number][] = [];
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const x = lo[0] + (i / (n - 1)) * (hi[0] - lo[0]);
      const y = lo[1] + (j / (n - 1)) * (hi[1] - lo[1]);
      const [u, v, z] = project(cam, [x, y, zTop]);
      if (z > 0 && u >= 0 && u <= cam.width && v >= 0 && v <= cam.height) {
        return true;
      }
      if ((i === 0 || i === n - 1) && (j === 0 || j === n - 1)) {
        corners.push([x, y, zTop]);
      }
    }
  }
  // wide blocks can straddle the image with every sample point outside
  const proj = corners.map((p) => project(cam, p));
  if (proj.every(([, , z]) => z > 0)) {
    const us = proj.map(([u]) => u);
    const vs = proj.map(([, v]) => v);
    if (
      Math.min(...us) <= cam.width && Math.max(...us) >= 0 &&
      Math.min(...vs) <= cam.height && Math.max(...vs) >= 0
    ) {
      return true;
    }
  }
  return false;
}

function depthKey(m: Manifest, ex: number, ey: number, b: BlockId): [number, number, number, number] {
  const [cx, cy] = blockCenter(m.layout, b);
  return [Math.hypot(cx - ex, cy - ey), b.lod, b.iy, b.ix];
}

function byKey(a: number[], b: number[]): number {
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

export function depthSort(blocks: BlockId[], cam: Camera, m: Manifest): BlockId[] {
  return [...blocks].sort((a, b) =>
    byKey(depthKey(m, cam.eye[0], cam.eye[1], a), depthKey(m, cam.eye[0], cam.eye[1], b)),
  );
}

export interface RenderPlan {
  blocks: BlockId[];
  eyeXy: [number, number];
  toLoad: BlockId[];
  toEvict: BlockId[];
  degraded: [BlockId, BlockId][];
  dropped: BlockId[];
}

/** Coarse-to-fine LOD selection; emitted blocks come back depth-sorted. */
export function selectLod(cam: Camera, m: Manifest, thresholds?: number[]): RenderPlan {
  const t = thresholds ?? m.policy.lod_distance_thresholds;
  const layout = m.layout;
  if (t.length !== layout.lod_count) {
    throw new Error("one distance threshold per LOD required");
  }
  for (let i = 0; i + 1 < t.length; i++) {
    if (t[i] >= t[i + 1]) {
      throw new Error(`thresholds must decrease strictly toward finer LODs: ${t}`);
    }
  }
  const emitted: BlockId[] = [];
  const descend = (b: BlockId) => {
    if (!visible(cam, b, m)) return;
    if (b.lod === 1) {
      emitted.push(b);
      return;
    }
    const c = renderCenter(m, b);
    const dist = Math.hypot(c[0] - cam.eye[0], c[1] - cam.eye[1], c[2] - cam.eye[2]);
    if (dist > t[b.lod - 2]) {
      emitted.push(b);
    } else {
      for (const child of children(b)) descend(child);
    }
  };
  for (const top of blocksAt(layout, layout.lod_count)) descend(top);
  return {
    blocks: depthSort(emitted, cam, m),
    eyeXy: [cam.eye[0], cam.eye[1]],
    toLoad: [],
    toEvict: [],
    degraded: [],
    dropped: [],
  };
}

export interface ResidentAsset<H> {
  handle: H;
  size: number;
  lastUsed: number;
}

export class ResidentSet<H> {
  budget: number;
  entries = new Map<string, ResidentAsset<H>>();
  clock = 0;

  constructor(budget: number) {
    this.budget = budget;
  }

  get totalBytes(): number {
    let sum = 0;
    for (const e of this.entries.values()) sum += e.size;
    return sum;
  }
}

/** Reconcile the resident set with a plan under the byte budget.
 *
 * Matches the service policy bit for bit: farthest-first degradation
 * to coarser parents until the plan fits, most-recently-used fill of
 * the leftover budget, fetches front-to-back.
 */
export function applyPlan<H>(
  plan: RenderPlan,
  resident: ResidentSet<H>,
  fetcher: (b: BlockId) => H,
  m: Manifest,
): ResidentSet<H> {
  const layout = m.layout;
  const budget = resident.budget;
  const [ex, ey] = plan.eyeXy;
  const sizeOf = (b: BlockId) => blockEntry(m, b).bytes;
  const dkey = (b: BlockId) => depthKey(m, ex, ey, b);

  // degrade farthest-first until the plan fits; a block too large for
  // the budget even at the coarsest level is an error
  let blocks = [...plan.blocks].sort((a, b) => byKey(dkey(a), dkey(b)));
  const total = () => blocks.reduce((s, b) => s + sizeOf(b), 0);
  while (blocks.length && total() > budget) {
    const fine = blocks.filter((b) => b.lod < layout.lod_count);
    if (!fine.length) {
      const worst = blocks.reduce((a, b) => (sizeOf(b) > sizeOf(a) ? b : a));
      if (sizeOf(worst) > budget) {
        throw new Error(
          `asset ${blockKey(worst)} (${sizeOf(worst)} bytes) exceeds the ` +
          `budget of ${budget} bytes on its own`,
        );
      }
      plan.dropped.push(blocks.pop()!);
      continue;
    }
    const victim = fine[fine.length - 1];
    const p = ancestor(victim, victim.lod + 1);
    const absorbed = blocks.filter(
      (b) => b.lod <= p.lod && blockKey(ancestor(b, p.lod)) === blockKey(p),
    );
    const keptKeys = new Set(absorbed.map(blockKey));
    blocks = blocks.filter((b) => !keptKeys.has(blockKey(b)));
    blocks.push(p);
    const seen = new Set<string>();
    blocks = blocks.filter((b) => {
      const k = blockKey(b);
      if (seen.has(k)) return false;
      seen.add(k);
      return true;
    }).sort((a, b) => byKey(dkey(a), dkey(b)));
    for (const b of absorbed) plan.degraded.push([b, p]);
  }
  plan.blocks = blocks;

  const planned = new Set(blocks.map(blockKey));
  let leftover = budget - total();
  const unplanned = [...resident.entries.keys()].filter((k) => !planned.has(k));
  unplanned.sort((ka, kb) => {
    const a = resident.entries.get(ka)!;
    const b = resident.entries.get(kb)!;
    if (a.lastUsed !== b.lastUsed) return b.lastUsed - a.lastUsed;
    const ba = parseKeyTuple(ka);
    const bb = parseKeyTuple(kb);
    return byKey(ba, bb);
  });
  for (const k of unplanned) {
    const sz = resident.entries.get(k)!.size;
    if (sz <= leftover) {
      leftover -= sz;
    } else {
      plan.toEvict.push(parseKeyBlock(k));
    }
  }
  for (const b of plan.toEvict) resident.entries.delete(blockKey(b));

  for (const b of blocks) {
    const k = blockKey(b);
    const existing = resident.entries.get(k);
    if (existing) {
      resident.clock += 1;
      existing.lastUsed = resident.clock;
    } else {
      const handle = fetcher(b);
      resident.clock += 1;
      resident.entries.set(k, { handle, size: sizeOf(b), lastUsed: resident.clock });
      plan.toLoad.push(b);
    }
  }
  return resident;
}

function parseKeyBlock(key: string): BlockId {
  const [lod, ix, iy] = key.slice(1).split("_").map(Number);
  return { lod, ix, iy };
}

function parseKeyTuple(key: string): number[] {
  const b = parseKeyBlock(key);
  return [b.lod, b.iy, b.ix];
}

export interface WalkStep {
  blocks: string[];
  to_load: string[];
  to_evict: string[];
  degraded: [string, string][];
  dropped: string[];
  resident: string[];
  resident_bytes: number;
}

/** Run select/apply over a pose sequence; mirrors the `plan --walk` CLI. */
export function planWalk(m: Manifest, poses: Camera[], budget: number): WalkStep[] {
  const resident = new ResidentSet<string>(budget);
  const steps: WalkStep[] = [];
  for (const cam of poses) {
    const plan = selectLod(cam, m);
    applyPlan(plan, resident, blockKey, m);
    steps.push({
      blocks: plan.blocks.map(blockKey),
      to_load: plan.toLoad.map(blockKey),
      to_evict: plan.toEvict.map(blockKey),
      degraded: plan.degraded.map(([a, b]) => [blockKey(a), blockKey(b)] as [string, string]),
      dropped: plan.dropped.map(blockKey),
      resident: [...resident.entries.keys()].sort(),
      resident_bytes: resident.totalBytes,
    });
  }
  return steps;
}
