/** Scene manifest schema (format_version 1) and block addressing. */

export interface BlockId {
  lod: number;
  ix: number;
  iy: number;
}

export function blockKey(b: BlockId): string {
  return `l${b.lod}_${b.ix}_${b.iy}`;
}

export function parseBlockKey(key: string): BlockId {
  const [lod, ix, iy] = key.slice(1).split("_").map(Number);
  return { lod, ix, iy };
}

export function parent(b: BlockId): BlockId {
  return { lod: b.lod + 1, ix: b.ix >> 1, iy: b.iy >> 1 };
}

export function children(b: BlockId): BlockId[] {
  const l = b.lod - 1;
  return [
    { lod: l, ix: 2 * b.ix, iy: 2 * b.iy },
    { lod: l, ix: 2 * b.ix + 1, iy: 2 * b.iy },
    { lod: l, ix: 2 * b.ix, iy: 2 * b.iy + 1 },
    { lod: l, ix: 2 * b.ix + 1, iy: 2 * b.iy + 1 },
  ];
}

export function ancestor(b: BlockId, lod: number): BlockId {
  const shift = lod - b.lod;
  return { lod, ix: b.ix >> shift, iy: b.iy >> shift };
}

export interface Layout {
  origin: [number, number];
  block_size: number;
  grid_dims: [number, number];
  z_range: [number, number];
  lod_count: number;
}

export interface BlockEntry {
  lod: number;
  ix: number;
  iy: number;
  files: Record<string, number>;
  sha256: Record<string, string>;
  z_top: number;
  bytes: number;
  shader_group: string;
  unbounded: boolean;
}

export interface Manifest {
  format_version: number;
  layout: Layout;
  quantization: [number, number][];
  voxel_res: number;
  triplane_res: number;
  pyramid_levels: number;
  plane_share: number;
  background: [number, number, number];
  policy: { lod_distance_thresholds: number[]; memory_budget: number };
  shader_groups: Record<string, string>;
  blocks: BlockEntry[];
}

export function parseManifest(data: unknown): Manifest {
  const m = data as Manifest;
  if (m.format_version !== 1) {
    throw new Error(`unsupported manifest format_version ${m.format_version}`);
  }
  return m;
}

export function blockEntry(m: Manifest, b: BlockId): BlockEntry {
  const e = m.blocks.find((x) => x.lod === b.lod && x.ix === b.ix && x.iy === b.iy);
  if (!e) throw new Error(`manifest has no block ${blockKey(b)}`);
  return e;
}

export function blockDir(b: BlockId): string {
  return `lod${b.lod}/block_${b.ix}_${b.iy}`;
}

export function blocksAt(layout: Layout, lod: number): BlockId[] {
  const s = 1 << (lod - 1);
  const nx = layout.grid_dims[0] / s;
  const ny = layout.grid_dims[1] / s;
  const out: BlockId[] = [];
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) out.push({ lod, ix, iy });
  }
  return out;
}

export function edgeAt(layout: Layout, lod: number): number {
  return layout.block_size * (1 << (lod - 1));
}

export function blockCenter(layout: Layout, b: BlockId): [number, number] {
  const e = edgeAt(layout, b.lod);
  return [layout.origin[0] + (b.ix + 0.5) * e, layout.origin[1] + (b.iy + 0.5) * e];
}

export function blockBounds(layout: Layout, b: BlockId): [[number, number, number], [number, number, number]] {
  const e = edgeAt(layout, b.lod);
  const lo: [number, number, number] = [
    layout.origin[0] + b.ix * e,
    layout.origin[1] + b.iy * e,
    layout.z_range[0],
  ];
  return [lo, [lo[0] + e, lo[1] + e, layout.z_range[1]]];
}

/** Merged blocks halve the z grid resolution per level. */
export function voxelResZ(m: Manifest, lod: number): number {
  return m.voxel_res >> (lod - 1);
}
