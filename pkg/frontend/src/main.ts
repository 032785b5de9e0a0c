/** Browser entry point.
 *
 * Query params: ?manifest=<url> (required), &budget=<bytes>,
 * &pose=<x,y,z[,tx,ty,tz]>. The debug button downloads a JSON snapshot
 * of the current plan and frame statistics, which the parity harness
 * consumes.
 */

import { NavState, bindControls, initialState, toCamera } from "./controls.js";
import { StreamLoader } from "./loader.js";
import { blockKey } from "./manifest.js";
import { BlockViewer, GpuBlock } from "./viewer.js";

interface AppState {
  nav: NavState;
  dirty: boolean;
}

async function boot() {
  const params = new URLSearchParams(location.search);
  const manifestUrl = params.get("manifest");
  const banner = document.getElementById("banner")!;
  if (!manifestUrl) {
    banner.textContent = "missing ?manifest=<url to manifest.json>";
    return;
  }
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const stats = document.getElementById("stats")!;
  const gl = canvas.getContext("webgl2");
  if (!gl) {
    banner.textContent = "WebGL2 unavailable";
    return;
  }

  const budget = params.get("budget");
  const loader = new StreamLoader(manifestUrl, {
    budget: budget ? Number(budget) : undefined,
  });
  let manifest;
  try {
    manifest = await loader.init();
  } catch (err) {
    banner.textContent = `manifest fetch failed: ${err}`;
    return;
  }

  const layout = manifest.layout;
  const cx = layout.origin[0] + (layout.grid_dims[0] * layout.block_size) / 2;
  const cy = layout.origin[1] + (layout.grid_dims[1] * layout.block_size) / 2;
  const cz = (layout.z_range[0] + layout.z_range[1]) / 2;
  const radius = layout.grid_dims[0] * layout.block_size;

  const state: AppState = {
    nav: initialState([cx, cy, cz], radius, canvas.width, canvas.height),
    dirty: true,
  };
  bindControls(canvas, state, () => {
    state.dirty = true;
  });
  const pose = params.get("pose");
  if (pose) {
    const v = pose.split(",").map(Number);
    state.nav = { ...state.nav, mode: "fly", eye: [v[0], v[1], v[2]] };
    if (v.length >= 6) state.nav.target = [v[3], v[4], v[5]];
  }

  let viewer: BlockViewer;
  try {
    viewer = new BlockViewer(gl, canvas.width, canvas.height);
  } catch (err) {
    banner.textContent = `shader build failed: ${err}`;
    console.error(err);
    return;
  }

  const gpuBlocks = new Map<string, GpuBlock>();
  loader.onBlockReady = () => {
    state.dirty = true;
  };

  let lastPlan = loader.update(toCamera(state.nav));
  const frame = () => {
    if (state.dirty) {
      state.dirty = false;
      const cam = toCamera(state.nav);
      lastPlan = loader.update(cam);
      // sync the GPU cache with residency
      for (const key of [...gpuBlocks.keys()]) {
        if (!loader.resident.entries.has(key)) {
          viewer.dispose(gpuBlocks.get(key)!);
          gpuBlocks.delete(key);
        }
      }
      const drawable: GpuBlock[] = [];
      for (const b of lastPlan.blocks) {
        const key = blockKey(b);
        let gpu = gpuBlocks.get(key);
        if (!gpu) {
          const data = loader.decoded.get(key);
          if (data) {
            gpu = viewer.upload(data);
            gpuBlocks.set(key, gpu);
          }
        }
        if (gpu) drawable.push(gpu);
      }
      const weights = loader.weights.get("global") ?? null;
      const fs = viewer.drawFrame(cam, drawable, manifest, weights);
      stats.textContent =
        `${fs.blocksDrawn}/${lastPlan.blocks.length} blocks | ` +
        `${fs.ms.toFixed(1)} ms | ` +
        `${(loader.resident.totalBytes / 1e6).toFixed(1)} MB resident | ` +
        `${loader.stats.fetches} fetches, ${loader.stats.failures} failures`;
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);

  document.getElementById("export")!.addEventListener("click", () => {
    const snapshot = {
      plan: {
        blocks: lastPlan.blocks.map(blockKey),
        to_load: lastPlan.toLoad.map(blockKey),
        to_evict: lastPlan.toEvict.map(blockKey),
      },
      resident: [...loader.resident.entries.keys()].sort(),
      resident_bytes: loader.resident.totalBytes,
      stats: loader.stats,
      camera: toCamera(state.nav),
    };
    const blob = new Blob([JSON.stringify(snapshot, null, 1)],
                          { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "viewer_snapshot.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });
}

boot();
