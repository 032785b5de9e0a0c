import numpy as np
import pytest

from blockfield.geometry import BlockLayout
from blockfield.synth import (
    CameraPath,
    Primitive,
    SceneSpec,
    build_field,
    orbit_path,
    parse_scene_json,
)


def simple_layout():
    return BlockLayout(origin=(0.0, 0.0), block_size=10.0, grid_dims=(2, 2),
                       z_range=(0.0, 10.0))


class TestBuildField:
    def test_empty_scene_zero_density(self):
        spec = SceneSpec(seed=0, layout=simple_layout(), primitives=())
        field = build_field(spec)
        pts = np.random.default_rng(0).uniform(0, 20, size=(100, 3))
        sigma, _, _ = field.activated(pts)
        assert np.all(sigma < 1e-6)

    def test_sphere_inside_outside(self):
        prim = Primitive("sphere", density=50.0, albedo=(0.9, 0.1, 0.2),
                         params={"center": [10.0, 10.0, 5.0], "radius": 3.0})
        spec = SceneSpec(seed=0, layout=simple_layout(), primitives=(prim,), falloff=0.3)
        field = build_field(spec)
        sigma_in, diffuse_in, _ = field.activated(np.array([[10.0, 10.0, 5.0]]))
        assert sigma_in[0] == pytest.approx(50.0, rel=0.01)
        assert np.allclose(diffuse_in[0], [0.9, 0.1, 0.2], atol=0.01)
        sigma_out, _, _ = field.activated(np.array([[10.0, 10.0, 9.5]]))
        assert sigma_out[0] < 1e-6

    def test_deterministic_in_seed(self):
        prims = (
            Primitive("terrain", density=30.0, albedo=(0.3, 0.5, 0.2),
                      params={"base": 2.0, "amplitude": 1.0, "waves": 5}),
            Primitive("sphere", density=20.0, albedo=(1.0, 1.0, 1.0),
                      params={"center": [5.0, 5.0, 5.0], "radius": 2.0}),
        )
        spec = SceneSpec(seed=77, layout=simple_layout(), primitives=prims)
        pts = np.random.default_rng(1).uniform(0, 20, size=(10_000, 3))
        a = build_field(spec).sample(pts)
        b = build_field(spec).sample(pts)
        assert np.array_equal(a, b)

    def test_different_seed_changes_terrain(self):
        prim = Primitive("terrain", density=30.0, albedo=(0.3, 0.5, 0.2),
                         params={"base": 3.0, "amplitude": 2.0})
        pts = np.random.default_rng(2).uniform(0, 20, size=(500, 3))
        a = build_field(SceneSpec(seed=1, layout=simple_layout(), primitives=(prim,))).sample(pts)
        b = build_field(SceneSpec(seed=2, layout=simple_layout(), primitives=(prim,))).sample(pts)
        assert not np.array_equal(a, b)

    def test_density_nonnegative_and_finite(self):
        prims = (
            Primitive("box", density=80.0, albedo=(0.5, 0.5, 0.5),
                      params={"min": [2, 2, 2], "max": [6, 6, 6]}),
            Primitive("slab", density=10.0, albedo=(0.1, 0.2, 0.3),
                      params={"axis": "z", "lo": 0.0, "hi": 1.0}),
        )
        spec = SceneSpec(seed=5, layout=simple_layout(), primitives=prims)
        field = build_field(spec)
        pts = np.random.default_rng(3).uniform(-5, 25, size=(2000, 3))
        pre = field.sample(pts)
        assert np.all(np.isfinite(pre))
        sigma, _, _ = field.activated(pts)
        assert np.all(sigma >= 0)

    def test_bad_primitive_rejected(self):
        with pytest.raises(ValueError):
            Primitive("sphere", density=-1.0, albedo=(0, 0, 0),
                      params={"center": [0, 0, 0], "radius": 1})
        with pytest.raises(ValueError):
            Primitive("sphere", density=np.inf, albedo=(0, 0, 0),
                      params={"center": [0, 0, 0], "radius": 1})

    def test_unknown_kind_raises_on_eval(self):
        prim = Primitive("torus", density=1.0, albedo=(0, 0, 0), params={})
        spec = SceneSpec(seed=0, layout=simple_layout(), primitives=(prim,))
        field = build_field(spec)
        with pytest.raises(ValueError):
            field.sample(np.zeros((1, 3)))


class TestOrbitPath:
    def path(self, n):
        return CameraPath(center=(10.0, 10.0), radius=5.0, height=8.0, count=n,
                          target=(10.0, 10.0, 2.0), width=64, height_px=48)

    def test_single_pose_on_plus_x(self):
        cams = orbit_path(self.path(1))
        assert len(cams) == 1
        assert np.allclose(cams[0].eye, [15.0, 10.0, 8.0])

    def test_four_poses_equally_spaced(self):
        cams = orbit_path(self.path(4))
        expect = [(15, 10), (10, 15), (5, 10), (10, 5)]
        for cam, (x, y) in zip(cams, expect):
            assert np.allclose(cam.eye[:2], [x, y], atol=1e-12)

    def test_rotations_orthonormal(self):
        for cam in orbit_path(self.path(7)):
            r = cam.rotation
            assert np.abs(r @ r.T - np.eye(3)).max() < 1e-9
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)

    def test_looks_at_target(self):
        for cam in orbit_path(self.path(5)):
            u, v, z = cam.project(np.array([[10.0, 10.0, 2.0]]))
            assert z[0] > 0
            assert u[0] == pytest.approx(cam.cx, abs=1e-6)
            assert v[0] == pytest.approx(cam.cy, abs=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            CameraPath(center=(0, 0), radius=0.0, height=1, count=1, target=(0, 0, 0))
        with pytest.raises(ValueError):
            CameraPath(center=(0, 0), radius=1.0, height=1, count=0, target=(0, 0, 0))


class TestSceneFile:
    def test_parse_defaults_capture(self):
        data = {
            "seed": 3,
            "layout": {"origin": [0, 0], "block_size": 10, "grid_dims": [2, 2],
                       "z_range": [0, 10]},
            "primitives": [
                {"type": "sphere", "center": [5, 5, 5], "radius": 1, "density": 10}
            ],
        }
        spec, path, shading = parse_scene_json(data)
        assert spec.seed == 3
        assert len(spec.primitives) == 1
        assert path.count >= 1
        assert shading["mode"] == "zero"

    def test_falloff_default_one_finest_voxel(self):
        spec = SceneSpec(seed=0, layout=simple_layout(), primitives=())
        assert spec.falloff_width() == pytest.approx(10.0 / 63.0)
