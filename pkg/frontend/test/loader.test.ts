import { describe, expect, it, vi } from "vitest";
import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { StreamLoader } from "../src/loader.js";
import { cameraFromJson } from "../src/math.js";
import { FIXTURES, fixtureManifest } from "./helpers.js";

function fixtureFetch(failures: Map<string, number> = new Map()): typeof fetch {
  const root = join(FIXTURES, "scene");
  return (async (input: RequestInfo | URL) => {
    const url = String(input);
    const path = url.replace("http://assets.test", "");
    const remaining = failures.get(path) ?? 0;
    if (remaining > 0) {
      failures.set(path, remaining - 1);
      return new Response(null, { status: 503 });
    }
    try {
      const data = readFileSync(join(root, path));
      return new Response(new Uint8Array(data), { status: 200 });
    } catch {
      return new Response(null, { status: 404 });
    }
  }) as typeof fetch;
}

describe("stream loader", () => {
  const manifest = fixtureManifest();
  const nearPose = cameraFromJson({
    eye: [10, -8, 8], target: [10, 10, 3], width: 64, height: 64, fov_deg: 60,
  });

  it("cold start fetches exactly the plan", async () => {
    const loader = new StreamLoader("http://assets.test/manifest.json", {
      fetchImpl: fixtureFetch(),
    });
    await loader.init();
    const plan = loader.update(nearPose);
    expect(plan.toLoad.length).toBe(plan.blocks.length);
    await Promise.all([...loader.resident.entries.values()].map((e) => e.handle));
    expect(loader.decoded.size).toBe(plan.blocks.length);
    expect(loader.stats.failures).toBe(0);
  });

  it("retries transient errors with backoff and succeeds", async () => {
    vi.useFakeTimers();
    try {
      const failures = new Map([["/manifest.json", 2]]);
      const loader = new StreamLoader("http://assets.test/manifest.json", {
        fetchImpl: fixtureFetch(failures), baseBackoffMs: 10,
      });
      const p = loader.init();
      await vi.runAllTimersAsync();
      const m = await p;
      expect(m.format_version).toBe(1);
    } finally {
      vi.useRealTimers();
    }
  });

  it("a missing texture fails that block but not the others", async () => {
    const root = join(FIXTURES, "scene");
    const fetchImpl = (async (input: RequestInfo | URL) => {
      const path = String(input).replace("http://assets.test", "");
      if (path === "/lod1/block_0_0/occupancy.bin") {
        return new Response(null, { status: 404 });
      }
      try {
        return new Response(new Uint8Array(readFileSync(join(root, path))), { status: 200 });
      } catch {
        return new Response(null, { status: 404 });
      }
    }) as typeof fetch;
    const loader = new StreamLoader("http://assets.test/manifest.json", { fetchImpl });
    await loader.init();
    const plan = loader.update(nearPose);
    await Promise.all([...loader.resident.entries.values()].map((e) => e.handle));
    expect(loader.stats.failures).toBe(1);
    expect(loader.decoded.size).toBe(plan.blocks.length - 1);
  });

  it("a one-block budget keeps exactly one block resident", async () => {
    // budget of exactly the coarsest block: every plan degrades to it
    const coarsest = manifest.blocks.filter((b) => b.lod === manifest.layout.lod_count);
    const budget = Math.max(...coarsest.map((b) => b.bytes));
    const loader = new StreamLoader("http://assets.test/manifest.json", {
      fetchImpl: fixtureFetch(), budget,
    });
    await loader.init();
    for (const eye of [[10, -8, 8], [30, 10, 9], [10, 30, 7]] as const) {
      const cam = cameraFromJson({
        eye: [...eye], target: [10, 10, 3], width: 64, height: 64, fov_deg: 60,
      });
      loader.update(cam);
      expect(loader.resident.totalBytes).toBeLessThanOrEqual(budget);
      expect(loader.resident.entries.size).toBe(1);
    }
  });

  it("lists drawable blocks only once decoded", async () => {
    const loader = new StreamLoader("http://assets.test/manifest.json", {
      fetchImpl: fixtureFetch(),
    });
    await loader.init();
    const plan = loader.update(nearPose);
    expect(loader.drawable(plan).length).toBe(0); // decode is async
    await Promise.all([...loader.resident.entries.values()].map((e) => e.handle));
    expect(loader.drawable(plan).length).toBe(plan.blocks.length);
  });

  it("drawable blocks keep the plan's depth order", async () => {
    const loader = new StreamLoader("http://assets.test/manifest.json", {
      fetchImpl: fixtureFetch(),
    });
    await loader.init();
    const plan = loader.update(nearPose);
    await Promise.all([...loader.resident.entries.values()].map((e) => e.handle));
    const drawn = loader.drawable(plan).map((d) =>
      `l${d.block.lod}_${d.block.ix}_${d.block.iy}`);
    const planned = plan.blocks.map((b) => `l${b.lod}_${b.ix}_${b.iy}`);
    expect(drawn).toEqual(planned); // composite order == depth_sort output
  });

  it("fixture scene has every file the manifest lists", () => {
    for (const e of manifest.blocks) {
      const dir = join(FIXTURES, "scene", `lod${e.lod}/block_${e.ix}_${e.iy}`);
      const names = new Set(readdirSync(dir));
      for (const f of Object.keys(e.files)) expect(names.has(f)).toBe(true);
    }
  });
});
