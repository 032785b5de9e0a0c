import numpy as np
import pytest

from blockfield.bake import BakeConfig, bake_scene
from blockfield.synth import build_field, orbit_path, parse_scene_json


def quad_scene_json():
    """2x2-block scene with two LODs used across the suite."""
    return {
        "seed": 11,
        "layout": {
            "origin": [0.0, 0.0],
            "block_size": 10.0,
            "grid_dims": [2, 2],
            "z_range": [0.0, 10.0],
            "lod_count": 2,
        },
        "falloff": 0.6,
        "primitives": [
            {"type": "sphere", "center": [7.0, 7.0, 4.0], "radius": 2.5,
             "density": 60.0, "albedo": [0.8, 0.3, 0.2],
             "feature": [0.6, 0.2, 0.4, 0.8]},
            {"type": "box", "min": [12.0, 11.0, 1.0], "max": [17.0, 16.0, 5.0],
             "density": 60.0, "albedo": [0.2, 0.5, 0.9]},
            {"type": "slab", "axis": "z", "lo": 0.0, "hi": 0.8,
             "density": 40.0, "albedo": [0.35, 0.45, 0.3]},
        ],
        "capture": {
            "center": [10.0, 10.0], "radius": 13.0, "height": 11.0, "count": 8,
            "target": [10.0, 10.0, 3.0], "fov_deg": 55, "image_width": 128, "image_height": 128,
        },
        "shading": {"mode": "zero"},
    }


@pytest.fixture(scope="session")
def quad_baked(tmp_path_factory):
    """Baked quad scene: (root, scene_json, field, cameras, cfg)."""
    root = tmp_path_factory.mktemp("quad_scene")
    scene_json = quad_scene_json()
    spec, path, _ = parse_scene_json(scene_json)
    field = build_field(spec)
    cameras = orbit_path(path)
    cfg = BakeConfig(voxel_res=32, triplane_res=64, pyramid_levels=3, ray_budget=10**6)
    bake_scene(field, spec.layout, cameras, cfg, root, scene_spec_json=scene_json)
    return root, scene_json, field, cameras, cfg


@pytest.fixture(scope="session")
def quad_loaded(quad_baked):
    from blockfield.bake import load_scene

    root, *_ = quad_baked
    scene, manifest = load_scene(root)
    return scene, manifest


def make_uniform_assets(density_pre=1.0, color_pre=0.0, voxel_res=16,
                        bounds_lo=(0.0, 0.0, 0.0), bounds_hi=(8.0, 8.0, 8.0),
                        occupied=True, block=None):
    """Fully occupied block whose every texel holds the same codes."""
    from blockfield.assets import BlockAssets, OccupancyPyramid
    from blockfield.bake import pack_atlas
    from blockfield.codec import QuantizationSpec, quantize_channels
    from blockfield.geometry import BlockId

    quant = QuantizationSpec()
    pre = np.zeros((voxel_res, voxel_res, voxel_res, 8))
    pre[..., 0] = density_pre
    pre[..., 1:] = color_pre
    codes = quantize_channels(pre, quant)
    occ = np.full((voxel_res,) * 3, bool(occupied))
    atlas, indirection = pack_atlas(codes, occ)
    planes = {
        k: quantize_channels(np.zeros((voxel_res, voxel_res, 8)), quant)
        for k in ("xy", "xz", "yz")
    }
    return BlockAssets(
        block=block or BlockId(1, 0, 0),
        voxel_res=voxel_res,
        triplane_res=voxel_res,
        atlas=atlas,
        indirection=indirection,
        planes=planes,
        occupancy=OccupancyPyramid.build(occ, 3),
        quant=quant,
        bounds=(np.array(bounds_lo, dtype=float), np.array(bounds_hi, dtype=float)),
    )
