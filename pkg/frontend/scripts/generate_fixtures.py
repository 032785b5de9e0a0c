#!/usr/bin/env python3
"""Generate oracle fixtures for the frontend test suite.

Bakes a small scene with the Python pipeline and freezes: the manifest
and one block's raw files (asset decode tests), a 50-pose plan walk
(loader parity), deferred-MLP forward vectors (shading parity), and a
single-block CPU golden render (sampling parity).

Run from the repository root:  python3 frontend/scripts/generate_fixtures.py
"""

import base64
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from blockfield.assets import DeferredShaderWeights, SceneManifest
from blockfield.bake import BakeConfig, bake_scene, load_scene
from blockfield.camera import PinholeCamera
from blockfield.geometry import BlockId
from blockfield.render import eval_shader, render_frame
from blockfield.stream import plan_walk
from blockfield.synth import build_field, orbit_path, parse_scene_json

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"

SCENE = {
    "seed": 31,
    "layout": {"origin": [0.0, 0.0], "block_size": 10.0, "grid_dims": [2, 2],
               "z_range": [0.0, 10.0], "lod_count": 2},
    "falloff": 0.6,
    "primitives": [
        {"type": "sphere", "center": [7.0, 7.0, 4.0], "radius": 2.5,
         "density": 50.0, "albedo": [0.8, 0.3, 0.2],
         "feature": [0.6, 0.2, 0.4, 0.8]},
        {"type": "box", "min": [12.0, 11.0, 1.0], "max": [17.0, 16.0, 5.0],
         "density": 50.0, "albedo": [0.2, 0.5, 0.9]},
    ],
    "capture": {"center": [10.0, 10.0], "radius": 13.0, "height": 11.0,
                "count": 6, "target": [10.0, 10.0, 3.0], "fov_deg": 55,
                "image_width": 96, "image_height": 96},
    "shading": {"mode": "random", "seed": 7, "scale": 0.2},
}

# two more parity scenes: terrain and a sparse floater
EXTRA_SCENES = {
    "terrain": {
        "seed": 55,
        "layout": {"origin": [0.0, 0.0], "block_size": 10.0, "grid_dims": [1, 1],
                   "z_range": [0.0, 10.0]},
        "falloff": 0.6,
        "primitives": [
            {"type": "terrain", "base": 2.5, "amplitude": 1.2, "waves": 5,
             "density": 50.0, "albedo": [0.35, 0.5, 0.25]},
        ],
        "capture": {"center": [5.0, 5.0], "radius": 8.0, "height": 9.0,
                    "count": 4, "target": [5.0, 5.0, 2.5], "fov_deg": 55,
                    "image_width": 96, "image_height": 96},
        "shading": {"mode": "random", "seed": 9, "scale": 0.15},
    },
    "sparse": {
        "seed": 73,
        "layout": {"origin": [0.0, 0.0], "block_size": 12.0, "grid_dims": [1, 1],
                   "z_range": [0.0, 12.0]},
        "falloff": 0.8,
        "primitives": [
            {"type": "sphere", "center": [6.0, 6.0, 6.0], "radius": 1.5,
             "density": 60.0, "albedo": [0.9, 0.7, 0.2],
             "feature": [0.3, 0.6, 0.1, 0.5]},
        ],
        "capture": {"center": [6.0, 6.0], "radius": 10.0, "height": 10.0,
                    "count": 4, "target": [6.0, 6.0, 6.0], "fov_deg": 50,
                    "image_width": 96, "image_height": 96},
        "shading": {"mode": "random", "seed": 13, "scale": 0.15},
    },
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    root = OUT / "scene"
    if root.exists():
        shutil.rmtree(root)

    spec, path, shading = parse_scene_json(SCENE)
    field = build_field(spec)
    cams = orbit_path(path)
    cfg = BakeConfig(voxel_res=16, triplane_res=16, pyramid_levels=2,
                     ray_budget=10 ** 6)
    weights = DeferredShaderWeights.random(seed=7, scale=0.2)
    bake_scene(field, spec.layout, cams, cfg, root,
               shader_weights={"global": weights}, scene_spec_json=SCENE)
    manifest = SceneManifest.load(root / "manifest.json")

    # 50-pose loader walk with a budget tight enough to force evictions
    rng = np.random.default_rng(17)
    poses = []
    for _ in range(50):
        eye = rng.uniform([-20, -20, 3], [40, 40, 35])
        target = rng.uniform([5, 5, 0], [15, 15, 6])
        poses.append(PinholeCamera.look_at(eye, target, 64, 64, fov_deg=55))
    finest_total = sum(e.total_bytes for b, e in manifest.blocks.items() if b.lod == 1)
    budget = int(0.75 * finest_total)
    steps = plan_walk(manifest, poses, budget)
    (OUT / "plan_walk.json").write_text(json.dumps({
        "budget": budget,
        "poses": [c.to_json() for c in poses],
        "steps": steps,
    }, indent=1, sort_keys=True))

    # deferred-MLP forward vectors
    rng = np.random.default_rng(3)
    cases = []
    for _ in range(16):
        cd = rng.random(3)
        ft = rng.random(4)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        res = eval_shader(weights, cd, ft, d[None])[0]
        cases.append({"cdiff": cd.tolist(), "feature": ft.tolist(),
                      "dir": d.tolist(), "residual": res.tolist()})
    (OUT / "shading.json").write_text(json.dumps({
        "weights": weights.to_json(), "cases": cases}, indent=1))

    # single-block golden render (pose fixed, Lambertian plus shading on)
    scene, _ = load_scene(root)
    block = BlockId(1, 0, 0)
    from blockfield.render import LoadedScene

    single = LoadedScene(layout=manifest.layout,
                         blocks={block: scene.blocks[block]},
                         weights=scene.weights, group_of=scene.group_of,
                         background=manifest.background)
    cam = PinholeCamera.look_at((18.0, 2.0, 9.0), (6.0, 7.0, 3.0), 48, 48,
                                fov_deg=55)
    fb = render_frame(cam, single)
    (OUT / "golden_block.json").write_text(json.dumps({
        "camera": cam.to_json(),
        "block": block.key(),
        "rgb": np.round(fb.rgb, 9).tolist(),
        "alpha": np.round(fb.alpha, 9).tolist(),
    }))

    # a full multi-block golden too (for the browser-side parity harness)
    fb_all = render_frame(cam, scene)
    (OUT / "golden_scene.json").write_text(json.dumps({
        "camera": cam.to_json(),
        "rgb": np.round(fb_all.rgb, 9).tolist(),
        "alpha": np.round(fb_all.alpha, 9).tolist(),
    }))

    # additional parity scenes with their own shading networks
    for tag, extra_json in EXTRA_SCENES.items():
        eroot = OUT / f"scene_{tag}"
        if eroot.exists():
            shutil.rmtree(eroot)
        espec, epath, eshading = parse_scene_json(extra_json)
        efield = build_field(espec)
        ecams = orbit_path(epath)
        eweights = DeferredShaderWeights.random(seed=int(eshading["seed"]),
                                                scale=float(eshading["scale"]))
        bake_scene(efield, espec.layout, ecams, cfg, eroot,
                   shader_weights={"global": eweights},
                   scene_spec_json=extra_json)
        escene, emanifest = load_scene(eroot)
        ecam = ecams[0]
        efb = render_frame(ecam, escene)
        (OUT / f"golden_{tag}.json").write_text(json.dumps({
            "camera": ecam.to_json(),
            "rgb": np.round(efb.rgb, 9).tolist(),
            "alpha": np.round(efb.alpha, 9).tolist(),
        }))

    # raw files of one block for decode tests (base64 for JSON transport)
    d = root / manifest.block_dir(block)
    files = {p.name: base64.b64encode(p.read_bytes()).decode() for p in sorted(d.iterdir())}
    (OUT / "block_files.json").write_text(json.dumps({
        "block": block.key(),
        "files": files,
        "manifest": json.loads((root / "manifest.json").read_text()),
    }))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    sys.exit(main())
