import { describe, expect, it } from "vitest";

import { BlockData } from "../src/assets.js";
import { CpuScene, renderFrame } from "../src/cpuref.js";
import { cameraFromJson } from "../src/math.js";
import { blockKey, blocksAt, parseBlockKey } from "../src/manifest.js";
import { ShaderWeights } from "../src/shading.js";
import { FIXTURES, fixtureJson, fixtureManifest, loadFixtureBlock } from "./helpers.js";
import { readFileSync } from "node:fs";
import { join } from "node:path";

// the pixel-parity acceptance bounds
const MEAN_TOL = 3 / 255;
const MAX_TOL = 16 / 255;

function loadWeights(manifest: ReturnType<typeof fixtureManifest>, scene = "scene") {
  const weights = new Map<string, ShaderWeights>();
  for (const [group, file] of Object.entries(manifest.shader_groups)) {
    weights.set(group, JSON.parse(
      readFileSync(join(FIXTURES, scene, file), "utf-8"),
    ) as ShaderWeights);
  }
  return weights;
}

function diffStats(rgb: Float64Array, golden: number[][][]) {
  const h = golden.length;
  const w = golden[0].length;
  let sum = 0;
  let max = 0;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let d = 0;
      for (let c = 0; c < 3; c++) {
        d = Math.max(d, Math.abs(rgb[(y * w + x) * 3 + c] - golden[y][x][c]));
      }
      sum += d;
      max = Math.max(max, d);
    }
  }
  return { mean: sum / (w * h), max };
}

describe("cpu reference renderer parity", () => {
  const manifest = fixtureManifest();
  const weights = loadWeights(manifest);

  it("matches the single-block golden frame", async () => {
    const fx = fixtureJson<any>("golden_block.json");
    const block = parseBlockKey(fx.block);
    const data = await loadFixtureBlock(manifest, block);
    const scene: CpuScene = {
      manifest,
      blocks: new Map([[fx.block, data]]),
      weights,
      groupOf: new Map([[fx.block, "global"]]),
    };
    const cam = cameraFromJson(fx.camera);
    const out = renderFrame(cam, scene);
    const { mean, max } = diffStats(out.rgb, fx.rgb);
    expect(mean).toBeLessThanOrEqual(MEAN_TOL);
    expect(max).toBeLessThanOrEqual(MAX_TOL);
    // same math in doubles: expect far tighter than the gate
    expect(max).toBeLessThan(1e-6);
  });

  it("matches the full-scene golden frame across blocks", async () => {
    const fx = fixtureJson<any>("golden_scene.json");
    const blocks = new Map<string, BlockData>();
    const groupOf = new Map<string, string>();
    for (const b of blocksAt(manifest.layout, 1)) {
      const data = await loadFixtureBlock(manifest, b);
      blocks.set(blockKey(b), data);
      groupOf.set(blockKey(b), "global");
    }
    const scene: CpuScene = { manifest, blocks, weights, groupOf };
    const cam = cameraFromJson(fx.camera);
    const out = renderFrame(cam, scene);
    const { mean, max } = diffStats(out.rgb, fx.rgb);
    expect(mean).toBeLessThanOrEqual(MEAN_TOL);
    expect(max).toBeLessThanOrEqual(MAX_TOL);
    expect(max).toBeLessThan(1e-6);
  });

  // the pixel-parity gate runs on three fixture scenes
  for (const tag of ["terrain", "sparse"]) {
    it(`matches the ${tag} scene golden frame`, async () => {
      const m2 = fixtureManifest(`scene_${tag}`);
      const w2 = loadWeights(m2, `scene_${tag}`);
      const fx = fixtureJson<any>(`golden_${tag}.json`);
      const blocks = new Map<string, BlockData>();
      const groupOf = new Map<string, string>();
      for (const b of blocksAt(m2.layout, 1)) {
        const data = await loadFixtureBlock(m2, b, `scene_${tag}`);
        blocks.set(blockKey(b), data);
        groupOf.set(blockKey(b), "global");
      }
      const scene: CpuScene = { manifest: m2, blocks, weights: w2, groupOf };
      const out = renderFrame(cameraFromJson(fx.camera), scene);
      const { mean, max } = diffStats(out.rgb, fx.rgb);
      expect(mean).toBeLessThanOrEqual(MEAN_TOL);
      expect(max).toBeLessThanOrEqual(MAX_TOL);
      expect(max).toBeLessThan(1e-6);
    });
  }
});
