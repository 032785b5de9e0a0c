"""Procedural volumetric test scenes and circular capture paths.

These stand in for trained scene models and real captures: every
primitive contributes density through a smooth falloff shell about one
voxel wide, so baking at the intended resolution does not alias. All
randomness is seeded; fields are pure functions of position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import PinholeCamera
from .field import FieldSource
from .geometry import BlockId
from .geometry import BlockLayout

_SIGMA_FLOOR = 1e-10
_COLOR_EPS = 1e-3  # keeps logits within the quantization range


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class Primitive:
    """One density-emitting shape with a constant albedo and feature."""

    kind: str
    density: float
    albedo: tuple[float, float, float]
    feature: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.density) or self.density < 0:
            raise ValueError(f"primitive density must be finite and >= 0, got {self.density}")
        if not all(np.isfinite(v) for v in (*self.albedo, *self.feature)):
            raise ValueError("primitive albedo/feature must be finite")

    def inside_distance(self, p: np.ndarray, rng_tables: dict) -> np.ndarray:
        """Signed distance, positive inside the shape (approximate for boxes)."""
        if self.kind == "sphere":
            c = np.asarray(self.params["center"], dtype=np.float64)
            return float(self.params["radius"]) - np.linalg.norm(p - c, axis=-1)
        if self.kind == "box":
            lo = np.asarray(self.params["min"], dtype=np.float64)
            hi = np.asarray(self.params["max"], dtype=np.float64)
            return np.minimum(p - lo, hi - p).min(axis=-1)
        if self.kind == "slab":
            k = "xyz".index(self.params["axis"])
            return np.minimum(p[..., k] - self.params["lo"], self.params["hi"] - p[..., k])
        if self.kind == "terrain":
            waves = rng_tables[id(self)]
            h = self.params["base"] + np.zeros(p.shape[:-1])
            for amp, kx, ky, phase in waves:
                h = h + amp * np.sin(kx * p[..., 0] + ky * p[..., 1] + phase)
            return h - p[..., 2]
        raise ValueError(f"unknown primitive kind {self.kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    """A procedural scene: primitives inside a box, plus its block layout."""

    seed: int
    layout: BlockLayout
    primitives: tuple[Primitive, ...]
    falloff: float | None = None  # meters; default: one finest voxel at res 64
    unbounded: tuple[tuple[int, int], ...] = ()  # border blocks to contract

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0, x1, y1 = self.layout.xy_extent()
        z0, z1 = self.layout.z_range
        return np.array([x0, y0, z0]), np.array([x1, y1, z1])

    def falloff_width(self) -> float:
        return self.falloff if self.falloff is not None else self.layout.block_size / 63.0


@dataclass(frozen=True)
class CameraPath:
    """Circular capture orbit; pose 0 sits on the +x axis of the circle."""

    center: tuple[float, float]
    radius: float
    height: float
    count: int
    target: tuple[float, float, float]
    fov_deg: float = 60.0
    width: int = 96
    height_px: int = 96

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("orbit needs at least one pose")
        if self.radius <= 0:
            raise ValueError("orbit radius must be positive")


def build_field(spec: SceneSpec) -> FieldSource:
    """Analytic attribute field for a scene.

    Density is the sum of primitive densities (smoothstep falloff at
    each surface); albedo and features are the density-weighted average
    of the contributing primitives. Output channels are pre-activations
    for the storage codec: log density, logit color, logit feature.
    """
    w = spec.falloff_width()
    rng = np.random.default_rng(spec.seed)
    tables: dict[int, list] = {}
    for prim in spec.primitives:
        if prim.kind == "terrain":
            n_waves = int(prim.params.get("waves", 5))
            amp = float(prim.params.get("amplitude", 1.0))
            x0, y0, x1, y1 = spec.layout.xy_extent()
            scale = max(x1 - x0, y1 - y0)
            waves = []
            for _ in range(n_waves):
                wavelength = scale / rng.uniform(1.5, 6.0)
                angle = rng.uniform(0, 2 * np.pi)
                k = 2 * np.pi / wavelength
                waves.append(
                    (
                        amp * rng.uniform(0.3, 1.0) / n_waves * 2.0,
                        k * np.cos(angle),
                        k * np.sin(angle),
                        rng.uniform(0, 2 * np.pi),
                    )
                )
            tables[id(prim)] = waves

    prims = spec.primitives

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = points.shape[0]
        sigma = np.zeros(n)
        albedo_acc = np.zeros((n, 3))
        feat_acc = np.zeros((n, 4))
        for prim in prims:
            d = prim.inside_distance(points, tables)
            s = prim.density * _smoothstep(d / w + 0.5)
            sigma += s
            albedo_acc += s[:, None] * np.asarray(prim.albedo)
            feat_acc += s[:, None] * np.asarray(prim.feature)
        safe = np.maximum(sigma, _SIGMA_FLOOR)
        albedo = albedo_acc / safe[:, None]
        feat = feat_acc / safe[:, None]
        pre = np.empty((n, 8))
        pre[:, 0] = np.log(safe)
        rest = np.clip(np.concatenate([albedo, feat], axis=1), _COLOR_EPS, 1.0 - _COLOR_EPS)
        pre[:, 1:] = np.log(rest / (1.0 - rest))
        return pre

    lo, hi = spec.box()
    flagged = frozenset(BlockId(1, ix, iy) for ix, iy in spec.unbounded)
    return FieldSource(fn=evaluate, bbox=(lo, hi), unbounded_blocks=flagged)


def orbit_path(path: CameraPath) -> list[PinholeCamera]:
    """Equally spaced poses on the orbit circle, all looking at the target."""
    poses = []
    for i in range(path.count):
        angle = 2.0 * np.pi * i / path.count
        eye = (
            path.center[0] + path.radius * np.cos(angle),
            path.center[1] + path.radius * np.sin(angle),
            path.height,
        )
        poses.append(
            PinholeCamera.look_at(
                eye, path.target, path.width, path.height_px, fov_deg=path.fov_deg
            )
        )
    return poses


def parse_primitive(d: dict) -> Primitive:
    kind = d["type"]
    params = {k: v for k, v in d.items() if k not in ("type", "density", "albedo", "feature")}
    return Primitive(
        kind=kind,
        density=float(d["density"]),
        albedo=tuple(d.get("albedo", (0.5, 0.5, 0.5))),
        feature=tuple(d.get("feature", (0.0, 0.0, 0.0, 0.0))),
        params=params,
    )


def load_scene_file(path: str | Path) -> tuple[SceneSpec, CameraPath, dict]:
    """Parse a scene spec file into (scene, capture path, shading config)."""
    data = json.loads(Path(path).read_text())
    return parse_scene_json(data)


def parse_scene_json(data: dict) -> tuple[SceneSpec, CameraPath, dict]:
    ld = data["layout"]
    layout = BlockLayout(
        origin=tuple(ld["origin"]),
        block_size=float(ld["block_size"]),
        grid_dims=tuple(ld["grid_dims"]),
        z_range=tuple(ld["z_range"]),
        lod_count=int(ld.get("lod_count", 1)),
    )
    spec = SceneSpec(
        seed=int(data.get("seed", 0)),
        layout=layout,
        primitives=tuple(parse_primitive(p) for p in data.get("primitives", [])),
        falloff=float(data["falloff"]) if "falloff" in data else None,
        unbounded=tuple((int(ix), int(iy)) for ix, iy in data.get("unbounded", [])),
    )
    cap = data.get("capture")
    if cap is None:
        x0, y0, x1, y1 = layout.xy_extent()
        z0, z1 = layout.z_range
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        cap = {
            "center": [cx, cy],
            "radius": 0.75 * max(x1 - x0, y1 - y0),
            "height": z1 + 0.5 * (z1 - z0),
            "count": 12,
            "target": [cx, cy, (z0 + z1) / 2.0],
        }
    path = CameraPath(
        center=tuple(cap["center"]),
        radius=float(cap["radius"]),
        height=float(cap["height"]),
        count=int(cap["count"]),
        target=tuple(cap["target"]),
        fov_deg=float(cap.get("fov_deg", 60.0)),
        width=int(cap.get("image_width", 96)),
        height_px=int(cap.get("image_height", 96)),
    )
    shading = data.get("shading", {"mode": "zero"})
    return spec, path, shading
