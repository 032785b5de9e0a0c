"""Command line entry point: synth, bake, lod, render, verify, serve,
plan, metrics. Every command prints machine-readable JSON with --json.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import tempfile
from pathlib import Path

import numpy as np


def _emit(args, payload: dict, human: str | None = None):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif human is not None:
        print(human)


def _parse_background(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"background must be one or three comma-separated values: {text!r}")
    return tuple(parts)


def cmd_synth(args) -> int:
    from .report import scene_preview
    from .synth import load_scene_file

    spec, path, shading = load_scene_file(args.spec)
    payload = {
        "seed": spec.seed,
        "primitives": len(spec.primitives),
        "blocks": list(spec.layout.grid_dims),
        "lod_count": spec.layout.lod_count,
        "capture_poses": path.count,
        "shading": shading.get("mode", "zero"),
    }
    if args.preview:
        p = scene_preview(spec, path, args.preview)
        payload["preview"] = str(p)
    _emit(args, payload, f"scene ok: {payload}")
    return 0


def _bake_config(args, manifest_defaults: dict | None = None):
    from .bake import BakeConfig

    kwargs = {}
    for name in ("voxel_res", "triplane_res", "tau_w", "tau_a", "pyramid_levels",
                 "plane_share", "ray_budget"):
        v = getattr(args, name, None)
        if v is not None:
            kwargs[name] = v
    return BakeConfig(**kwargs)


def cmd_bake(args) -> int:
    from .assets import DeferredShaderWeights
    from .bake import bake_scene
    from .synth import build_field, load_scene_file, orbit_path, parse_scene_json

    scene_json = json.loads(Path(args.scene).read_text())
    if args.lods is not None:
        scene_json.setdefault("layout", {})["lod_count"] = args.lods
    spec, path, shading = parse_scene_json(scene_json)
    cfg = _bake_config(args)
    field = build_field(spec)
    cameras = orbit_path(path)

    if args.shading is not None:
        shading = {"mode": args.shading, "seed": args.shading_seed}
    if shading.get("mode", "zero") == "random":
        weights = DeferredShaderWeights.random(int(shading.get("seed", 0)),
                                               scale=float(shading.get("scale", 0.1)))
    else:
        weights = DeferredShaderWeights.zeros()

    manifest = bake_scene(
        field, spec.layout, cameras, cfg, args.out,
        shader_weights={"global": weights},
        memory_budget=args.budget,
        scene_spec_json=scene_json,
        workers=args.workers,
    )
    total = sum(e.total_bytes for e in manifest.blocks.values())
    payload = {
        "out": str(args.out),
        "blocks": len(manifest.blocks),
        "lods": manifest.layout.lod_count,
        "total_bytes": total,
        "voxel_res": cfg.voxel_res,
        "triplane_res": cfg.triplane_res,
    }
    _emit(args, payload, f"baked {payload['blocks']} blocks, {total} bytes -> {args.out}")
    return 0


def cmd_lod(args) -> int:
    from .assets import SceneManifest
    from .bake import (_bake_config_from_manifest, default_thresholds, export_assets,
                       generate_lod, import_assets)
    from .synth import build_field, parse_scene_json

    root = Path(args.root)
    manifest = SceneManifest.load(root / "manifest.json")
    if manifest.scene_spec is None:
        raise ValueError("manifest has no embedded scene spec; re-bake with one")
    scene_json = dict(manifest.scene_spec)
    if args.lods is not None:
        scene_json.setdefault("layout", {})["lod_count"] = args.lods
    spec, _, _ = parse_scene_json(scene_json)
    layout = spec.layout
    cfg = _bake_config_from_manifest(manifest)
    field = build_field(spec)

    level = {b: import_assets(manifest, root, b) for b in manifest.layout.blocks_at(1)}
    entries = {b: manifest.blocks[b] for b in level}
    for _ in range(1, layout.lod_count):
        level = generate_lod(field, level, layout, cfg)
        for bid, assets in level.items():
            entries[bid] = export_assets(assets, root, shader_group="global")

    manifest = dataclasses.replace(
        manifest,
        layout=layout,
        blocks=entries,
        lod_distance_thresholds=default_thresholds(layout),
        scene_spec=scene_json,
    )
    manifest.save(root / "manifest.json")
    payload = {"root": str(root), "lods": layout.lod_count, "blocks": len(entries)}
    _emit(args, payload, f"levels rebuilt: {payload}")
    return 0


def cmd_render(args) -> int:
    from .bake import load_scene
    from .camera import load_camera
    from .render import render_frame

    scene, manifest = load_scene(args.root, lod=args.lod)
    cam = load_camera(args.camera, width=args.width, height=args.height)
    background = _parse_background(args.background) if args.background else None
    fb = render_frame(
        cam, scene,
        mode=args.mode,
        use_occupancy=not args.no_occupancy_skip,
        background=background,
        workers=args.workers,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".pfm":
        fb.save_pfm(out)
    else:
        fb.save_png(out)
    payload = {
        "out": str(out),
        "width": fb.width,
        "height": fb.height,
        "mean_alpha": float(fb.alpha.mean()),
    }
    _emit(args, payload, f"rendered {out} ({fb.width}x{fb.height})")
    return 0


def cmd_verify(args) -> int:
    from .report import write_verify_report
    from .verify import verify_assets

    scene_json = json.loads(Path(args.spec).read_text()) if args.spec else None
    with tempfile.TemporaryDirectory() as tmp:
        results, errs = verify_assets(args.root, args.trials, tmp,
                                      scene_json=scene_json, seed=args.seed)
    if args.out_dir:
        write_verify_report(results, errs, args.out_dir)
    payload = {"suites": [r.to_json() for r in results],
               "passed": all(r.passed for r in results)}
    lines = [
        f"{'PASS' if r.passed else 'FAIL'} {r.name}: max_error={r.max_error:.3e} "
        f"tol={r.tolerance:.3e} ({r.trials} trials, {r.seconds:.2f}s) {r.detail}"
        for r in results
    ]
    _emit(args, payload, "\n".join(lines))
    if not args.json and not payload["passed"]:
        print("verification FAILED")
    return 0 if payload["passed"] else 1


def cmd_serve(args) -> int:
    from .stream import serve

    host, _, port = args.addr.rpartition(":")
    server = serve(args.root, (host or "127.0.0.1", int(port)))
    _emit(args, {"addr": f"{server.server_address[0]}:{server.server_address[1]}"},
          f"serving {args.root} on {server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_plan(args) -> int:
    from .assets import SceneManifest
    from .camera import load_camera
    from .stream import ResidentSet, apply_plan, plan_walk, select_lod

    root = Path(args.root)
    manifest = SceneManifest.load(root / "manifest.json")
    budget = args.budget if args.budget is not None else manifest.memory_budget
    if args.walk:
        poses_data = json.loads(Path(args.walk).read_text())
        from .camera import PinholeCamera

        poses = [PinholeCamera.from_json(d) for d in poses_data]
        steps = plan_walk(manifest, poses, budget)
        payload = {"steps": steps, "budget": budget}
        _emit(args, payload, json.dumps(payload, indent=1, sort_keys=True))
        return 0
    cam = load_camera(args.camera)
    plan = select_lod(cam, manifest)
    resident = ResidentSet(budget=budget)
    apply_plan(plan, resident, lambda b: b.key(), manifest)
    payload = {**plan.to_json(), "budget": budget,
               "resident_bytes": resident.total_bytes}
    _emit(args, payload, json.dumps(payload, indent=1, sort_keys=True))
    return 0


def cmd_metrics(args) -> int:
    from .render import load_pfm, load_png, psnr
    from .report import write_metrics_report

    def load(p: str):
        return load_pfm(p) if p.endswith(".pfm") else load_png(p)

    ref = load(args.ref)
    test = load(args.test)
    value = psnr(ref, test)
    diff = np.abs(np.asarray(ref, dtype=np.float64) - test).max(axis=-1)
    if args.out_dir:
        write_metrics_report(value, diff, args.out_dir)
    payload = {
        "psnr_db": value,
        "mean_abs_diff": float(diff.mean()),
        "max_abs_diff": float(diff.max()),
    }
    _emit(args, payload, f"psnr {value:.2f} dB, mean diff {diff.mean():.5f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockfield",
                                 description="block-partitioned baked radiance fields")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.set_defaults(fn=fn)
        return p

    p = add("synth", cmd_synth, help="validate a scene spec / render a preview")
    p.add_argument("--spec", required=True)
    p.add_argument("--preview", default=None, help="write a preview figure PNG")

    p = add("bake", cmd_bake, help="bake a scene into block assets")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--voxel-res", dest="voxel_res", type=int, default=None)
    p.add_argument("--triplane-res", dest="triplane_res", type=int, default=None)
    p.add_argument("--lods", type=int, default=None)
    p.add_argument("--tau-w", dest="tau_w", type=float, default=None)
    p.add_argument("--tau-a", dest="tau_a", type=float, default=None)
    p.add_argument("--plane-share", dest="plane_share", type=float, default=None)
    p.add_argument("--pyramid-levels", dest="pyramid_levels", type=int, default=None)
    p.add_argument("--ray-budget", dest="ray_budget", type=int, default=None)
    p.add_argument("--budget", type=int, default=None, help="memory budget bytes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--shading", choices=["zero", "random"], default=None)
    p.add_argument("--shading-seed", type=int, default=0)

    p = add("lod", cmd_lod, help="regenerate coarser levels from the manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--lods", type=int, default=None)

    p = add("render", cmd_render, help="render a frame from baked assets")
    p.add_argument("--root", required=True)
    p.add_argument("--camera", required=True, help="pose file (JSON)")
    p.add_argument("--out", required=True, help="output image (.png or .pfm)")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--mode", choices=["per-block", "post-composite"], default="per-block")
    p.add_argument("--no-occupancy-skip", action="store_true")
    p.add_argument("--background", default=None, help="r,g,b in [0,1]")
    p.add_argument("--lod", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)

    p = add("verify", cmd_verify, help="run the verification suites")
    p.add_argument("--root", required=True)
    p.add_argument("--spec", default=None)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", default=None)

    p = add("serve", cmd_serve, help="serve baked assets over HTTP")
    p.add_argument("--root", required=True)
    p.add_argument("--addr", default="127.0.0.1:8632")

    p = add("plan", cmd_plan, help="print the render plan for a pose")
    p.add_argument("--root", required=True)
    p.add_argument("--camera", default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--walk", default=None, help="JSON list of poses")

    p = add("metrics", cmd_metrics, help="compare two images (PSNR)")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "plan" and not args.walk and not args.camera:
        ap.error("plan requires --camera or --walk")
    try:
        return args.fn(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
