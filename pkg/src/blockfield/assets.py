"""Baked per-block assets: block-sparse voxel atlas, feature planes,
occupancy pyramid, shading weights, and the streamable scene manifest.

Storage is quantized to 8-bit codes (see codec). The atlas keeps only
macroblocks (8^3 texel bricks) that contain at least one occupied
vertex; an indirection grid maps macroblock coordinates to atlas slots
or EMPTY. Attribute queries are trilinear over the voxel grid plus the
sum of bilinear samples of the three planes, in pre-activation space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import (
    NUM_CHANNELS,
    QuantizationSpec,
    apply_activations,
    dequant_tables,
)
from .geometry import BlockId, BlockLayout, contract

MACROBLOCK_EDGE = 8
EMPTY = -1

PLANE_AXES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}
MANIFEST_FORMAT_VERSION = 1


@dataclass
class OccupancyPyramid:
    """Max-pooled hierarchy of binary vertex grids, level 0 at voxel res."""

    levels: list[np.ndarray]

    def __post_init__(self):
        for i, lvl in enumerate(self.levels):
            if lvl.dtype != bool or lvl.ndim != 3:
                raise ValueError(f"level {i} must be a 3D bool array")
            if i > 0:
                prev = self.levels[i - 1].shape
                if tuple(2 * s for s in lvl.shape) != prev:
                    raise ValueError(
                        f"level {i} shape {lvl.shape} is not half of {prev}"
                    )

    @property
    def resolution(self) -> int:
        return self.levels[0].shape[0]

    @staticmethod
    def build(level0: np.ndarray, num_levels: int) -> "OccupancyPyramid":
        levels = [np.ascontiguousarray(level0, dtype=bool)]
        for _ in range(num_levels - 1):
            levels.append(maxpool_occupancy(levels[-1]))
        return OccupancyPyramid(levels)


def maxpool_occupancy(grid: np.ndarray) -> np.ndarray:
    """Halve a binary grid; a parent is occupied iff any of its 8 children is."""
    r = grid.shape[0]
    if any(s % 2 for s in grid.shape):
        raise ValueError(f"occupancy resolution {grid.shape} must be even")
    return (
        grid.reshape(r // 2, 2, grid.shape[1] // 2, 2, grid.shape[2] // 2, 2)
        .any(axis=(1, 3, 5))
    )


@dataclass
class DeferredShaderWeights:
    """3-layer MLP (16 hidden units) producing the view-dependent residual.

    Input is diffuse (3) + feature (4) + sin/cos positional encoding of
    the view direction over `freq_bands` octaves; output is 3 channels.
    """

    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    freq_bands: int = 4

    HIDDEN = 16

    def __post_init__(self):
        d_in = 7 + 6 * self.freq_bands
        shapes = {
            "w0": (d_in, self.HIDDEN),
            "b0": (self.HIDDEN,),
            "w1": (self.HIDDEN, self.HIDDEN),
            "b1": (self.HIDDEN,),
            "w2": (self.HIDDEN, 3),
            "b2": (3,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @staticmethod
    def zeros(freq_bands: int = 4) -> "DeferredShaderWeights":
        d_in = 7 + 6 * freq_bands
        h = DeferredShaderWeights.HIDDEN
        return DeferredShaderWeights(
            np.zeros((d_in, h)), np.zeros(h),
            np.zeros((h, h)), np.zeros(h),
            np.zeros((h, 3)), np.zeros(3),
            freq_bands=freq_bands,
        )

    @staticmethod
    def random(seed: int, scale: float = 0.1, freq_bands: int = 4) -> "DeferredShaderWeights":
        rng = np.random.default_rng(seed)
        d_in = 7 + 6 * freq_bands
        h = DeferredShaderWeights.HIDDEN
        return DeferredShaderWeights(
            rng.normal(0, scale, (d_in, h)), rng.normal(0, scale, h),
            rng.normal(0, scale, (h, h)), rng.normal(0, scale, h),
            rng.normal(0, scale, (h, 3)), rng.normal(0, scale, 3),
            freq_bands=freq_bands,
        )

    def to_json(self) -> dict:
        return {
            "freq_bands": self.freq_bands,
            **{k: getattr(self, k).tolist() for k in ("w0", "b0", "w1", "b1", "w2", "b2")},
        }

    @staticmethod
    def from_json(data: dict) -> "DeferredShaderWeights":
        return DeferredShaderWeights(
            *(np.array(data[k]) for k in ("w0", "b0", "w1", "b1", "w2", "b2")),
            freq_bands=int(data.get("freq_bands", 4)),
        )


@dataclass
class BlockAssets:
    """Quantized attribute storage for one block.

    atlas: (n_macroblocks, 8, 8, 8, 8) uint8 texel bricks.
    indirection: (R/8, R/8, Rz/8) int32 macroblock -> atlas slot, EMPTY holes.
    planes: {"xy", "xz", "yz"} -> (R_t, R_t, 8) uint8.
    bounds: world AABB (lo, hi) the grids span (before contraction).

    The xy grid resolution is voxel_res; merged blocks at coarser levels
    keep voxel_res in xy (covering twice the extent) but halve the z
    resolution per level, so every merge coarsens all three axes.
    """

    block: BlockId
    voxel_res: int
    triplane_res: int
    atlas: np.ndarray
    indirection: np.ndarray
    planes: dict[str, np.ndarray]
    occupancy: OccupancyPyramid
    quant: QuantizationSpec
    bounds: tuple[np.ndarray, np.ndarray]
    unbounded: bool = False
    voxel_res_z: int | None = None
    _sampler: "BlockSampler | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.voxel_res_z is None:
            object.__setattr__(self, "voxel_res_z", self.voxel_res)
        r = self.voxel_res
        rz = self.voxel_res_z
        nb = r // MACROBLOCK_EDGE
        nbz = rz // MACROBLOCK_EDGE
        if r % MACROBLOCK_EDGE or rz % MACROBLOCK_EDGE:
            raise ValueError(f"voxel res {(r, r, rz)} not divisible by {MACROBLOCK_EDGE}")
        if self.indirection.shape != (nb, nb, nbz):
            raise ValueError(f"indirection shape {self.indirection.shape} != {(nb, nb, nbz)}")
        if self.occupancy.levels[0].shape != (r, r, rz):
            raise ValueError("occupancy level-0 resolution must equal the voxel grid")
        used = self.indirection[self.indirection != EMPTY]
        if used.size:
            if used.min() < 0 or used.max() >= self.atlas.shape[0]:
                raise ValueError("indirection entry outside atlas")
            if np.unique(used).size != used.size:
                raise ValueError("two indirection entries alias one atlas macroblock")
        # occupied vertices must be covered by a resident macroblock
        occ = self.occupancy.levels[0]
        if occ.any():
            mb_occ = occ.reshape(
                nb, MACROBLOCK_EDGE, nb, MACROBLOCK_EDGE, nbz, MACROBLOCK_EDGE
            ).any(axis=(1, 3, 5))
            if np.any(mb_occ & (self.indirection == EMPTY)):
                raise ValueError("occupied vertex not covered by the indirection grid")

    @property
    def res3(self) -> tuple[int, int, int]:
        return (self.voxel_res, self.voxel_res, self.voxel_res_z)

    @property
    def voxel_width(self) -> float:
        """World step between grid vertices along x (the march step size)."""
        lo, hi = self.bounds
        span = (hi[0] - lo[0]) * (2.0 if self.unbounded else 1.0)
        return float(span) / (self.voxel_res - 1)

    def z_top(self) -> float:
        """Height of the highest occupied vertex; bounds z_min if empty."""
        lo, hi = self.bounds
        occ = self.occupancy.levels[0]
        if not occ.any():
            return float(lo[2])
        k = int(np.max(np.nonzero(occ.any(axis=(0, 1)))[0]))
        return float(lo[2] + k * (hi[2] - lo[2]) / (self.voxel_res_z - 1))

    def sampler(self) -> "BlockSampler":
        if self._sampler is None:
            self._sampler = BlockSampler(self)
        return self._sampler


def block_local_coords(points, lo, hi, unbounded: bool) -> np.ndarray:
    """World points -> block-local coordinates; interior maps to [-1, 1]^3.

    Unbounded border blocks contract everything outside the interior
    into the [-2, 2]^3 shell their grids also cover.
    """
    q = 2.0 * (points - lo) / (hi - lo) - 1.0
    return contract(q) if unbounded else q


def block_grid_coords(points, lo, hi, res, unbounded: bool) -> np.ndarray:
    """World points -> continuous vertex-grid coordinates in [0, res-1].

    res may be a scalar or a per-axis triple.
    """
    q = block_local_coords(points, lo, hi, unbounded)
    half = 2.0 if unbounded else 1.0
    return (q + half) / (2.0 * half) * (np.asarray(res) - 1)


def unpack_atlas(atlas: np.ndarray, indirection: np.ndarray, res3) -> np.ndarray:
    """Rebuild the dense (R, R, Rz, 8) uint8 grid; EMPTY macroblocks read as 0."""
    m = MACROBLOCK_EDGE
    if np.isscalar(res3):
        res3 = (res3, res3, res3)
    rx, ry, rz = res3
    nb = (rx // m, ry // m, rz // m)
    dense = np.zeros((*nb, m, m, m, NUM_CHANNELS), dtype=np.uint8)
    occ = indirection != EMPTY
    dense[occ] = atlas[indirection[occ]]
    return (
        dense.transpose(0, 3, 1, 4, 2, 5, 6)
        .reshape(rx, ry, rz, NUM_CHANNELS)
    )


class BlockSampler:
    """Vectorized attribute queries against one block's baked assets.

    Caches a dense dequant-ready copy of the atlas plus per-cell
    emptiness so the renderer pays one gather per corner. Read-only
    after construction; safe to share across threads.
    """

    def __init__(self, assets: BlockAssets):
        self.assets = assets
        self.res3 = np.array(assets.res3)
        self.tres = assets.triplane_res
        self.dense = unpack_atlas(assets.atlas, assets.indirection, assets.res3)
        self.dqT = np.ascontiguousarray(dequant_tables(assets.quant).T)  # (256, 8)
        self.chan = np.arange(NUM_CHANNELS)
        lo, hi = assets.bounds
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.unbounded = assets.unbounded
        self.pyramid = assets.occupancy.levels
        cells = self.res3 - 1
        # cell occupied := any of its 8 corner vertices occupied
        occ = self.pyramid[0]
        c = occ[:-1, :-1, :-1]
        for dx, dy, dz in np.ndindex(2, 2, 2):
            if (dx, dy, dz) != (0, 0, 0):
                c = c | occ[dx : dx + cells[0], dy : dy + cells[1], dz : dz + cells[2]]
        self.cell_occ = c
        # covered := the cell's corners touch at least one resident macroblock
        mb = assets.indirection != EMPTY
        vert_mb = np.repeat(np.repeat(np.repeat(mb, MACROBLOCK_EDGE, 0), MACROBLOCK_EDGE, 1), MACROBLOCK_EDGE, 2)
        cv = vert_mb[:-1, :-1, :-1]
        for dx, dy, dz in np.ndindex(2, 2, 2):
            if (dx, dy, dz) != (0, 0, 0):
                cv = cv | vert_mb[dx : dx + cells[0], dy : dy + cells[1], dz : dz + cells[2]]
        self.cell_covered = cv
        # skip_level[c]: -1 when cell c must be sampled, else the coarsest
        # pyramid level whose entries covering the cell's corners are all
        # empty (the precomputed result of descending the pyramid)
        skip = np.where(self.cell_occ, -1, 0).astype(np.int8)
        axes_idx = [np.arange(n) for n in cells]
        for lvl in range(1, len(self.pyramid)):
            empty = ~self.pyramid[lvl]
            lo_e = [idx >> lvl for idx in axes_idx]
            hi_e = [(idx + 1) >> lvl for idx in axes_idx]
            ok = np.ones(tuple(cells), dtype=bool)
            for bits in np.ndindex(2, 2, 2):
                sx = hi_e[0] if bits[0] else lo_e[0]
                sy = hi_e[1] if bits[1] else lo_e[1]
                sz = hi_e[2] if bits[2] else lo_e[2]
                ok &= empty[np.ix_(sx, sy, sz)]
            skip[ok & (skip >= 0)] = lvl
        self.skip_level = skip
        # grid-space AABB of occupied cells; rays outside it sample nothing
        if self.cell_occ.any():
            nz = np.nonzero(self.cell_occ)
            self.occ_cell_lo = np.array([int(a.min()) for a in nz], dtype=np.float64)
            self.occ_cell_hi = np.array([int(a.max()) for a in nz], dtype=np.float64)
        else:
            self.occ_cell_lo = None
            self.occ_cell_hi = None

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        """World points -> grid-domain coordinates in [-1, 1] (or [-2, 2])."""
        return block_local_coords(points, self.lo, self.hi, self.unbounded)

    def grid_coords(self, points: np.ndarray, res) -> np.ndarray:
        return block_grid_coords(points, self.lo, self.hi, res, self.unbounded)

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        g = self.grid_coords(points, self.res3)
        return np.clip(np.floor(g).astype(np.int64), 0, self.res3 - 2)

    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(sigma, diffuse, feature) at world points, shape (N, .)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = points.shape[0]
        g = self.grid_coords(points, self.res3)
        g = np.clip(g, 0.0, self.res3 - 1)
        cell = np.clip(np.floor(g).astype(np.int64), 0, self.res3 - 2)
        covered = self.cell_covered[cell[:, 0], cell[:, 1], cell[:, 2]]

        sigma = np.zeros(n)
        diffuse = np.zeros((n, 3))
        feature = np.zeros((n, 4))
        if covered.any():
            idx = np.nonzero(covered)[0]
            pre = self.pre_from_grid(g[idx], cell[idx])
            s, d, f = apply_activations(pre)
            sigma[idx] = s
            diffuse[idx] = d
            feature[idx] = f
        return sigma, diffuse, feature

    def sample_pre(self, points: np.ndarray) -> np.ndarray:
        """Dequantized pre-activations (N, 8): voxel trilinear + plane sum."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        g = np.clip(self.grid_coords(points, self.res3), 0.0, self.res3 - 1)
        cell = np.clip(np.floor(g).astype(np.int64), 0, self.res3 - 2)
        return self.pre_from_grid(g, cell)

    def pre_from_grid(self, g: np.ndarray, cell: np.ndarray) -> np.ndarray:
        """Pre-activations at voxel-grid coordinates g with known cells."""
        frac = g - cell
        pre = np.zeros((g.shape[0], NUM_CHANNELS))
        for dx, dy, dz in np.ndindex(2, 2, 2):
            w = (
                (frac[:, 0] if dx else 1.0 - frac[:, 0])
                * (frac[:, 1] if dy else 1.0 - frac[:, 1])
                * (frac[:, 2] if dz else 1.0 - frac[:, 2])
            )
            codes = self.dense[cell[:, 0] + dx, cell[:, 1] + dy, cell[:, 2] + dz]
            pre += w[:, None] * self.dqT[codes, self.chan]
        # the plane lattice shares the block's domain: rescale per axis
        gt = g * ((self.tres - 1) / (self.res3 - 1))
        for name, axes in PLANE_AXES.items():
            pre += self._sample_plane(self.assets.planes[name], gt[:, list(axes)])
        return pre

    def _sample_plane(self, plane: np.ndarray, gt: np.ndarray):
        gt = np.clip(gt, 0.0, self.tres - 1)
        cell = np.clip(np.floor(gt).astype(np.int64), 0, self.tres - 2)
        frac = gt - cell
        out = np.zeros((gt.shape[0], NUM_CHANNELS))
        for du, dv in np.ndindex(2, 2):
            w = (frac[:, 0] if du else 1.0 - frac[:, 0]) * (
                frac[:, 1] if dv else 1.0 - frac[:, 1]
            )
            codes = plane[cell[:, 0] + du, cell[:, 1] + dv]
            out += w[:, None] * self.dqT[codes, self.chan]
        return out


def query_attributes(p, assets: BlockAssets) -> tuple[float, np.ndarray, np.ndarray]:
    """Attributes of a single world point inside the block's domain."""
    sigma, diffuse, feature = assets.sampler().query(np.asarray(p, dtype=np.float64)[None])
    return float(sigma[0]), diffuse[0], feature[0]


@dataclass
class BlockEntry:
    """Per-block record in the manifest."""

    block: BlockId
    files: dict[str, int]
    sha256: dict[str, str]
    z_top: float
    total_bytes: int
    shader_group: str = "global"
    unbounded: bool = False

    def to_json(self) -> dict:
        return {
            "lod": self.block.lod,
            "ix": self.block.ix,
            "iy": self.block.iy,
            "files": self.files,
            "sha256": self.sha256,
            "z_top": self.z_top,
            "bytes": self.total_bytes,
            "shader_group": self.shader_group,
            "unbounded": self.unbounded,
        }

    @staticmethod
    def from_json(d: dict) -> "BlockEntry":
        return BlockEntry(
            block=BlockId(int(d["lod"]), int(d["ix"]), int(d["iy"])),
            files={k: int(v) for k, v in d["files"].items()},
            sha256=dict(d.get("sha256", {})),
            z_top=float(d["z_top"]),
            total_bytes=int(d["bytes"]),
            shader_group=d.get("shader_group", "global"),
            unbounded=bool(d.get("unbounded", False)),
        )


@dataclass
class SceneManifest:
    """Streamable index of every LOD, block, asset file and policy knob."""

    layout: BlockLayout
    quant: QuantizationSpec
    voxel_res: int
    triplane_res: int
    pyramid_levels: int
    blocks: dict[BlockId, BlockEntry]
    shader_groups: dict[str, str]
    lod_distance_thresholds: list[float]
    memory_budget: int
    background: tuple[float, float, float] = (0.5, 0.5, 0.5)
    plane_share: float = 0.0
    bake_params: dict = field(default_factory=dict)
    scene_spec: dict | None = None

    def __post_init__(self):
        for lod in range(1, self.layout.lod_count + 1):
            expected = set(self.layout.blocks_at(lod))
            have = {b for b in self.blocks if b.lod == lod}
            if have != expected:
                raise ValueError(
                    f"manifest LOD {lod} lists {len(have)} blocks, expected {len(expected)}"
                )
        if len(self.lod_distance_thresholds) != self.layout.lod_count:
            raise ValueError("one distance threshold per LOD required")

    def block_dir(self, block: BlockId) -> str:
        return f"lod{block.lod}/block_{block.ix}_{block.iy}"

    def to_json(self) -> dict:
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "layout": {
                "origin": list(self.layout.origin),
                "block_size": self.layout.block_size,
                "grid_dims": list(self.layout.grid_dims),
                "z_range": list(self.layout.z_range),
                "lod_count": self.layout.lod_count,
            },
            "quantization": self.quant.to_json(),
            "voxel_res": self.voxel_res,
            "triplane_res": self.triplane_res,
            "pyramid_levels": self.pyramid_levels,
            "plane_share": self.plane_share,
            "background": list(self.background),
            "policy": {
                "lod_distance_thresholds": self.lod_distance_thresholds,
                "memory_budget": self.memory_budget,
            },
            "shader_groups": self.shader_groups,
            "bake": self.bake_params,
            "scene_spec": self.scene_spec,
            "blocks": [self.blocks[b].to_json() for b in sorted(self.blocks)],
        }

    @staticmethod
    def from_json(data: dict) -> "SceneManifest":
        if data.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise ValueError(f"unsupported manifest format_version {data.get('format_version')}")
        ld = data["layout"]
        layout = BlockLayout(
            origin=tuple(ld["origin"]),
            block_size=float(ld["block_size"]),
            grid_dims=tuple(ld["grid_dims"]),
            z_range=tuple(ld["z_range"]),
            lod_count=int(ld["lod_count"]),
        )
        entries = [BlockEntry.from_json(b) for b in data["blocks"]]
        return SceneManifest(
            layout=layout,
            quant=QuantizationSpec.from_json(data["quantization"]),
            voxel_res=int(data["voxel_res"]),
            triplane_res=int(data["triplane_res"]),
            pyramid_levels=int(data["pyramid_levels"]),
            blocks={e.block: e for e in entries},
            shader_groups=dict(data["shader_groups"]),
            lod_distance_thresholds=[float(x) for x in data["policy"]["lod_distance_thresholds"]],
            memory_budget=int(data["policy"]["memory_budget"]),
            background=tuple(data.get("background", (0.5, 0.5, 0.5))),
            plane_share=float(data.get("plane_share", 0.0)),
            bake_params=data.get("bake", {}),
            scene_spec=data.get("scene_spec"),
        )

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @staticmethod
    def load(path: str | Path) -> "SceneManifest":
        return SceneManifest.from_json(json.loads(Path(path).read_text()))
