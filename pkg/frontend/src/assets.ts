/** Block asset decoding: occupancy pyramid bits, the implied
 * indirection grid, and texel assembly from the atlas PNG slices.
 * Mirrors the baker's export layout exactly.
 */

import { DecodedPng, decodePng } from "./png.js";
import { BlockId, Manifest, blockEntry, voxelResZ } from "./manifest.js";
import { NUM_CHANNELS } from "./codec.js";

export const MACROBLOCK = 8;
export const EMPTY = -1;

export interface OccupancyLevels {
  shapes: [number, number, number][];
  levels: Uint8Array[]; // 1 byte per vertex after unpacking
}

export function decodeOccupancy(
  bytes: Uint8Array, voxelRes: number, voxelResZ_: number, pyramidLevels: number,
): OccupancyLevels {
  const shapes: [number, number, number][] = [];
  const levels: Uint8Array[] = [];
  let shape: [number, number, number] = [voxelRes, voxelRes, voxelResZ_];
  let offset = 0;
  for (let l = 0; l < pyramidLevels; l++) {
    const cells = shape[0] * shape[1] * shape[2];
    const nbytes = Math.ceil(cells / 8);
    const bits = new Uint8Array(cells);
    for (let i = 0; i < cells; i++) {
      bits[i] = (bytes[offset + (i >> 3)] >> (7 - (i & 7))) & 1;
    }
    shapes.push(shape);
    levels.push(bits);
    offset += nbytes;
    shape = [shape[0] >> 1, shape[1] >> 1, shape[2] >> 1];
  }
  return { shapes, levels };
}

/** Atlas slots in C scan order of occupied macroblocks (import rule). */
export function macroblockIndirection(
  occ0: Uint8Array, shape: [number, number, number],
): { grid: Int32Array; nb: [number, number, number]; count: number } {
  const m = MACROBLOCK;
  const nb: [number, number, number] = [shape[0] / m, shape[1] / m, shape[2] / m];
  const grid = new Int32Array(nb[0] * nb[1] * nb[2]).fill(EMPTY);
  let count = 0;
  for (let bx = 0; bx < nb[0]; bx++) {
    for (let by = 0; by < nb[1]; by++) {
      for (let bz = 0; bz < nb[2]; bz++) {
        let any = 0;
        for (let x = 0; x < m && !any; x++) {
          for (let y = 0; y < m && !any; y++) {
            for (let z = 0; z < m && !any; z++) {
              const vx = bx * m + x;
              const vy = by * m + y;
              const vz = bz * m + z;
              any = occ0[(vx * shape[1] + vy) * shape[2] + vz];
            }
          }
        }
        if (any) {
          grid[(bx * nb[1] + by) * nb[2] + bz] = count++;
        }
      }
    }
  }
  return { grid, nb, count };
}

export interface BlockData {
  block: BlockId;
  res: [number, number, number];
  triplaneRes: number;
  dense: Uint8Array; // (rx, ry, rz, 8) texel codes, EMPTY bricks zero
  planes: Record<string, Uint8Array>; // (rt, rt, 8)
  occ: OccupancyLevels;
  indirection: Int32Array;
  nb: [number, number, number];
  nSlots: number;
  bounds: [[number, number, number], [number, number, number]];
  unbounded: boolean;
  // raw decoded images kept for GPU upload (slot-grid atlas layout)
  atlasSlices: { a: DecodedPng; b: DecodedPng }[];
  planeImages: Record<string, { a: DecodedPng; b: DecodedPng }>;
}

export function atlasSlotGrid(nMb: number): number {
  return nMb ? Math.ceil(Math.sqrt(nMb)) : 0;
}

/** Assemble the dense code grid from decoded atlas slice images. */
export async function assembleBlock(
  m: Manifest, b: BlockId, files: Map<string, Uint8Array>,
  bounds: [[number, number, number], [number, number, number]],
): Promise<BlockData> {
  const rz = voxelResZ(m, b.lod);
  const res: [number, number, number] = [m.voxel_res, m.voxel_res, rz];
  const occBytes = files.get("occupancy.bin");
  if (!occBytes) throw new Error("occupancy.bin missing");
  const occ = decodeOccupancy(occBytes, m.voxel_res, rz, m.pyramid_levels);
  const { grid: indirection, nb, count } = macroblockIndirection(occ.levels[0], res);

  const dense = new Uint8Array(res[0] * res[1] * res[2] * NUM_CHANNELS);
  const atlasSlices: { a: DecodedPng; b: DecodedPng }[] = [];
  if (count > 0) {
    const s = atlasSlotGrid(count);
    for (let z = 0; z < MACROBLOCK; z++) {
      const a = await decodePng(files.get(`atlas_z${z}_a.png`)!);
      const bb = await decodePng(files.get(`atlas_z${z}_b.png`)!);
      atlasSlices.push({ a, b: bb });
      for (let bx = 0; bx < nb[0]; bx++) {
        for (let by = 0; by < nb[1]; by++) {
          for (let bz = 0; bz < nb[2]; bz++) {
            const slot = indirection[(bx * nb[1] + by) * nb[2] + bz];
            if (slot === EMPTY) continue;
            const row = Math.floor(slot / s);
            const col = slot % s;
            for (let y = 0; y < MACROBLOCK; y++) {
              for (let x = 0; x < MACROBLOCK; x++) {
                const px = ((row * 8 + y) * a.width + col * 8 + x) * 4;
                const vx = bx * 8 + x;
                const vy = by * 8 + y;
                const vz = bz * 8 + z;
                const o = ((vx * res[1] + vy) * res[2] + vz) * NUM_CHANNELS;
                for (let c = 0; c < 4; c++) {
                  dense[o + c] = a.rgba[px + c];
                  dense[o + 4 + c] = bb.rgba[px + c];
                }
              }
            }
          }
        }
      }
    }
  }

  const planes: Record<string, Uint8Array> = {};
  const planeImages: Record<string, { a: DecodedPng; b: DecodedPng }> = {};
  for (const name of ["xy", "xz", "yz"]) {
    const a = await decodePng(files.get(`plane_${name}_a.png`)!);
    const bb = await decodePng(files.get(`plane_${name}_b.png`)!);
    planeImages[name] = { a, b: bb };
    const rt = a.width;
    const plane = new Uint8Array(rt * rt * NUM_CHANNELS);
    // image rows follow the plane's second axis: plane[i, j] = img[y=j, x=i]
    for (let i = 0; i < rt; i++) {
      for (let j = 0; j < rt; j++) {
        const px = (j * rt + i) * 4;
        const o = (i * rt + j) * NUM_CHANNELS;
        for (let c = 0; c < 4; c++) {
          plane[o + c] = a.rgba[px + c];
          plane[o + 4 + c] = bb.rgba[px + c];
        }
      }
    }
    planes[name] = plane;
  }

  const entry = blockEntry(m, b);
  return {
    block: b,
    res,
    triplaneRes: m.triplane_res,
    dense,
    planes,
    occ,
    indirection,
    nb,
    nSlots: count,
    bounds,
    unbounded: entry.unbounded,
    atlasSlices,
    planeImages,
  };
}
