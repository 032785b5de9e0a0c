"""Baking: turn a ground-truth field into block-sparse texture assets.

The pipeline marks occupancy by marching capture rays, samples the
field on each block's voxel and plane lattices, quantizes, packs the
occupied macroblocks into an atlas, and derives coarser levels by
re-sampling the field on merged 2x2 blocks. Serialization is PNG for
texels and packed bits for occupancy; round trips are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .assets import (
    EMPTY,
    MACROBLOCK_EDGE,
    PLANE_AXES,
    BlockAssets,
    BlockEntry,
    OccupancyPyramid,
    SceneManifest,
    block_grid_coords,
    maxpool_occupancy,
)
from .camera import PinholeCamera
from .codec import (
    NUM_CHANNELS,
    QuantizationSpec,
    density_activation,
    dequant_tables,
    quantize_channels,
)
from .field import FieldSource
from .geometry import BlockId, BlockLayout, uncontract
from .render import ray_aabb

_CONTRACT_CLIP = 2.0 - 1e-4  # grid corners of unbounded blocks sit at infinity


@dataclass(frozen=True)
class BakeConfig:
    """Baking knobs; thresholds follow the weight/opacity retention rule."""

    voxel_res: int = 64
    triplane_res: int = 256
    tau_w: float = 0.005
    tau_a: float = 0.005
    pyramid_levels: int = 3
    plane_share: float = 0.0
    quant: QuantizationSpec = field(default_factory=QuantizationSpec)
    ray_budget: int = 200_000
    ray_chunk: int = 16_384

    def __post_init__(self):
        for name in ("voxel_res", "triplane_res"):
            r = getattr(self, name)
            if r < 2 or (r & (r - 1)) != 0:
                raise ValueError(f"{name} must be a power of two, got {r}")
        for name in ("tau_w", "tau_a"):
            t = getattr(self, name)
            if not 0.0 < t < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {t}")
        if not 0.0 <= self.plane_share <= 1.0:
            raise ValueError("plane_share must lie in [0, 1]")
        if self.voxel_res % MACROBLOCK_EDGE:
            raise ValueError(f"voxel_res must be a multiple of {MACROBLOCK_EDGE}")

    def res3_at(self, lod: int) -> tuple[int, int, int]:
        """Merged blocks keep the xy resolution but halve z per level."""
        rz = self.voxel_res >> (lod - 1)
        if rz < MACROBLOCK_EDGE:
            raise ValueError(
                f"voxel_res {self.voxel_res} too small for LOD {lod}: "
                f"z resolution {rz} drops below the macroblock edge"
            )
        return (self.voxel_res, self.voxel_res, rz)


def block_vertex_positions(lo, hi, res3, unbounded: bool) -> np.ndarray:
    """World positions of the (rx, ry, rz) grid vertices of a block."""
    rx, ry, rz = (res3, res3, res3) if np.isscalar(res3) else res3
    half = 2.0 if unbounded else 1.0
    qs = [-half + np.linspace(0.0, 1.0, r) * 2.0 * half for r in (rx, ry, rz)]
    qx, qy, qz = np.meshgrid(*qs, indexing="ij")
    local = np.stack([qx, qy, qz], axis=-1)
    if unbounded:
        local = uncontract(np.clip(local, -_CONTRACT_CLIP, _CONTRACT_CLIP))
    return lo + (local + 1.0) / 2.0 * (hi - lo)


def _bilerp(plane: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Bilinear sample of an (R, R, C) grid at fractional coordinates."""
    r = plane.shape[0]
    gx = np.clip(gx, 0.0, r - 1)
    gy = np.clip(gy, 0.0, r - 1)
    x0 = np.clip(np.floor(gx).astype(np.int64), 0, r - 2)
    y0 = np.clip(np.floor(gy).astype(np.int64), 0, r - 2)
    fx = (gx - x0)[..., None]
    fy = (gy - y0)[..., None]
    return (
        plane[x0, y0] * (1 - fx) * (1 - fy)
        + plane[x0 + 1, y0] * fx * (1 - fy)
        + plane[x0, y0 + 1] * (1 - fx) * fy
        + plane[x0 + 1, y0 + 1] * fx * fy
    )


def sample_field_to_grids(src: FieldSource, block: BlockId, layout: BlockLayout,
                          cfg: BakeConfig):
    """Dense pre-activation grids for one block: voxel cube + three planes.

    The planes carry `plane_share` of the field's low-frequency signal
    (axis-mean projections, split evenly across the three planes); the
    voxel grid then absorbs the *dequantized* plane contribution so
    that voxel + plane-sum reconstructs the field exactly at vertices,
    up to the voxel channel's own codec error.
    """
    lo, hi = layout.block_bounds(block)
    unbounded = block in src.unbounded_blocks
    res3 = cfg.res3_at(block.lod)
    rt = cfg.triplane_res
    verts = block_vertex_positions(lo, hi, res3, unbounded)
    pre = src.sample(verts.reshape(-1, 3)).reshape(*res3, NUM_CHANNELS)

    planes_pre = {}
    share = cfg.plane_share
    for name, axes in PLANE_AXES.items():
        if share == 0.0:
            planes_pre[name] = np.zeros((rt, rt, NUM_CHANNELS))
            continue
        ortho = next(a for a in range(3) if a not in axes)
        frac_t = np.linspace(0.0, 1.0, rt)
        frac_o = np.linspace(0.0, 1.0, res3[ortho])
        half = 2.0 if unbounded else 1.0
        grids = np.meshgrid(frac_t, frac_t, frac_o, indexing="ij")
        local = np.empty((rt, rt, res3[ortho], 3))
        local[..., axes[0]] = -half + grids[0] * 2 * half
        local[..., axes[1]] = -half + grids[1] * 2 * half
        local[..., ortho] = -half + grids[2] * 2 * half
        if unbounded:
            local = uncontract(np.clip(local, -_CONTRACT_CLIP, _CONTRACT_CLIP))
        pts = lo + (local + 1.0) / 2.0 * (hi - lo)
        vals = src.sample(pts.reshape(-1, 3)).reshape(rt, rt, res3[ortho], NUM_CHANNELS)
        planes_pre[name] = vals.mean(axis=2) * (share / 3.0)

    # subtract what the quantized planes will reconstruct at each vertex
    dq = dequant_tables(cfg.quant)
    idx = [np.arange(r) / (r - 1) * (rt - 1) for r in res3]
    contrib = np.zeros((*res3, NUM_CHANNELS))
    for name, axes in PLANE_AXES.items():
        codes = quantize_channels(planes_pre[name], cfg.quant)
        deq = np.stack([dq[c][codes[..., c]] for c in range(NUM_CHANNELS)], axis=-1)
        ga, gb = np.meshgrid(idx[axes[0]], idx[axes[1]], indexing="ij")
        flat = _bilerp(deq, ga.ravel(), gb.ravel())
        flat = flat.reshape(res3[axes[0]], res3[axes[1]], NUM_CHANNELS)
        shape = [1, 1, 1, NUM_CHANNELS]
        shape[axes[0]] = res3[axes[0]]
        shape[axes[1]] = res3[axes[1]]
        contrib += flat.reshape(shape)
    return pre - contrib, planes_pre


def mark_occupancy(src: FieldSource, layout: BlockLayout, cfg: BakeConfig,
                   cameras: list[PinholeCamera], lod: int = 1) -> dict[BlockId, np.ndarray]:
    """March capture rays through the field and mark retained samples.

    A sample is retained when its blending weight exceeds tau_w and its
    opacity exceeds tau_a; the eight vertices of its containing cell
    become occupied. Transmittance is carried across blocks in the same
    front-to-back order the renderer uses.
    """
    if not cameras:
        raise ValueError("occupancy marking requires a non-empty ray set")
    res3 = cfg.res3_at(lod)
    r = cfg.voxel_res
    blocks = layout.blocks_at(lod)
    grids = {b: np.zeros(res3, dtype=bool) for b in blocks}
    total = sum(c.width * c.height for c in cameras)
    stride = max(1, math.isqrt(max(total // max(cfg.ray_budget, 1), 1)))

    for cam in cameras:
        dirs_all = cam.ray_directions()[::stride, ::stride].reshape(-1, 3)
        for start in range(0, dirs_all.shape[0], cfg.ray_chunk):
            dirs = dirs_all[start : start + cfg.ray_chunk]
            n = dirs.shape[0]
            origins = np.broadcast_to(cam.eye, (n, 3))
            trans = np.ones(n)

            def order_key(b):
                cx, cy = layout.block_center(b)
                return (np.hypot(cx - cam.eye[0], cy - cam.eye[1]), b.lod, b.iy, b.ix)

            for bid in sorted(blocks, key=order_key):
                # once transmittance drops to tau_w no sample can be retained
                live0 = trans > cfg.tau_w
                if not live0.any():
                    break
                lo, hi = layout.block_bounds(bid)
                delta = (hi[0] - lo[0]) / (r - 1)
                t0, t1 = ray_aabb(origins, dirs, lo, hi, 1e-6, np.inf)
                count = np.where(live0 & (t1 > t0), np.floor((t1 - t0) / delta + 0.5), 0.0)
                idx = np.zeros(n)
                grid = grids[bid]
                unbounded = bid in src.unbounded_blocks
                alive = idx < count
                while alive.any():
                    li = np.nonzero(alive)[0]
                    t = t0[li] + (idx[li] + 0.5) * delta
                    p = origins[li] + t[:, None] * dirs[li]
                    sigma = density_activation(src.sample(p)[:, 0])
                    alpha = 1.0 - np.exp(-sigma * delta)
                    w = trans[li] * alpha
                    keep = (w > cfg.tau_w) & (alpha > cfg.tau_a)
                    if keep.any():
                        g = block_grid_coords(p[keep], lo, hi, res3, unbounded)
                        cell = np.clip(np.floor(g).astype(np.int64), 0,
                                       np.array(res3) - 2)
                        for dx, dy, dz in np.ndindex(2, 2, 2):
                            grid[cell[:, 0] + dx, cell[:, 1] + dy, cell[:, 2] + dz] = True
                    trans[li] *= 1.0 - alpha
                    idx[li] += 1.0
                    alive = (idx < count) & (trans > cfg.tau_w)
    return grids


def bake_occupancy(src: FieldSource, block: BlockId, layout: BlockLayout,
                   cfg: BakeConfig, cameras: list[PinholeCamera]) -> np.ndarray:
    """Level-0 occupancy for one block (full marking pass, one block kept)."""
    return mark_occupancy(src, layout, cfg, cameras, lod=block.lod)[block]


def dense_alpha_occupancy(src: FieldSource, block: BlockId, layout: BlockLayout,
                          cfg: BakeConfig) -> np.ndarray:
    """Threshold marking on a dense cell-center sweep (no visibility term).

    Marks the corners of every cell whose center opacity at this
    block's step size exceeds tau_a. An occupancy oracle for tests and
    a sanity sweep independent of ray coverage.
    """
    res3 = cfg.res3_at(block.lod)
    lo, hi = layout.block_bounds(block)
    unbounded = block in src.unbounded_blocks
    verts = block_vertex_positions(lo, hi, res3, unbounded)
    centers = 0.125 * (
        verts[:-1, :-1, :-1] + verts[1:, :-1, :-1] + verts[:-1, 1:, :-1]
        + verts[:-1, :-1, 1:] + verts[1:, 1:, :-1] + verts[1:, :-1, 1:]
        + verts[:-1, 1:, 1:] + verts[1:, 1:, 1:]
    )
    delta = (hi[0] - lo[0]) / (res3[0] - 1)
    sigma = density_activation(src.sample(centers.reshape(-1, 3))[:, 0])
    alpha = 1.0 - np.exp(-sigma * delta)
    cells = tuple(r - 1 for r in res3)
    hot = (alpha > cfg.tau_a).reshape(cells)
    occ = np.zeros(res3, dtype=bool)
    for dx, dy, dz in np.ndindex(2, 2, 2):
        occ[dx : dx + cells[0], dy : dy + cells[1], dz : dz + cells[2]] |= hot
    return occ


def pack_atlas(grid: np.ndarray, occ0: np.ndarray):
    """Copy macroblocks holding at least one occupied vertex into a tight atlas.

    Returns (atlas, indirection); untouched macroblocks map to EMPTY.
    Slots are assigned in C scan order of macroblock coordinates, which
    also makes the layout reproducible from occupancy alone.
    """
    m = MACROBLOCK_EDGE
    if any(s % m for s in grid.shape[:3]):
        raise ValueError(f"grid resolution {grid.shape[:3]} not divisible by {m}")
    nb = tuple(s // m for s in grid.shape[:3])
    mb_occ = occ0.reshape(nb[0], m, nb[1], m, nb[2], m).any(axis=(1, 3, 5))
    n = int(mb_occ.sum())
    indirection = np.full(nb, EMPTY, dtype=np.int32)
    indirection[mb_occ] = np.arange(n, dtype=np.int32)
    bricks = grid.reshape(nb[0], m, nb[1], m, nb[2], m, -1).transpose(0, 2, 4, 1, 3, 5, 6)
    atlas = bricks[mb_occ].copy()
    return atlas, indirection


def macroblock_indirection(occ0: np.ndarray) -> np.ndarray:
    """Indirection grid implied by occupancy (same slot order as pack_atlas)."""
    m = MACROBLOCK_EDGE
    nb = tuple(s // m for s in occ0.shape)
    mb_occ = occ0.reshape(nb[0], m, nb[1], m, nb[2], m).any(axis=(1, 3, 5))
    indirection = np.full(nb, EMPTY, dtype=np.int32)
    indirection[mb_occ] = np.arange(int(mb_occ.sum()), dtype=np.int32)
    return indirection


def build_block_assets(src: FieldSource, block: BlockId, layout: BlockLayout,
                       cfg: BakeConfig, occ0: np.ndarray) -> BlockAssets:
    """Sample, quantize and pack one block given its level-0 occupancy."""
    voxel_pre, planes_pre = sample_field_to_grids(src, block, layout, cfg)
    voxel_codes = quantize_channels(voxel_pre, cfg.quant)
    atlas, indirection = pack_atlas(voxel_codes, occ0)
    planes = {k: quantize_channels(v, cfg.quant) for k, v in planes_pre.items()}
    pyramid = OccupancyPyramid.build(occ0, cfg.pyramid_levels)
    return BlockAssets(
        block=block,
        voxel_res=cfg.voxel_res,
        triplane_res=cfg.triplane_res,
        atlas=atlas,
        indirection=indirection,
        planes=planes,
        occupancy=pyramid,
        quant=cfg.quant,
        bounds=layout.block_bounds(block),
        unbounded=block in src.unbounded_blocks,
        voxel_res_z=cfg.res3_at(block.lod)[2],
    )


def generate_lod(src: FieldSource, children: dict[BlockId, BlockAssets],
                 layout: BlockLayout, cfg: BakeConfig) -> dict[BlockId, BlockAssets]:
    """Merge 2x2 block groups into the next coarser level.

    Grids are re-sampled from the field at the merged block's halved
    effective resolution (the data-path equivalent of freezing and
    refining a coarser model). Occupancy is the children's marking
    resampled into the merged frame and max-pooled, re-thresholded to
    binary on the one-occupied-child rule.
    """
    lods = {b.lod for b in children}
    if len(lods) != 1:
        raise ValueError(f"children span multiple levels: {sorted(lods)}")
    lod = lods.pop()
    if lod + 1 > layout.lod_count:
        raise ValueError(f"layout has no level coarser than {lod}")
    r = cfg.voxel_res
    rz_child = cfg.res3_at(lod)[2]
    cfg.res3_at(lod + 1)  # validates the coarser z resolution exists
    out = {}
    for parent in layout.blocks_at(lod + 1):
        kids = parent.children()
        missing = [k for k in kids if k not in children]
        if missing:
            raise ValueError(f"incomplete 2x2 group under {parent}: missing {missing}")
        fine = np.zeros((2 * r - 1, 2 * r - 1, rz_child), dtype=bool)
        for kid in kids:
            ox = (kid.ix % 2) * (r - 1)
            oy = (kid.iy % 2) * (r - 1)
            fine[ox : ox + r, oy : oy + r, :] |= children[kid].occupancy.levels[0]
        pooled = fine[::2, ::2, :].copy()
        pooled[:-1, :, :] |= fine[1::2, ::2, :]
        pooled[:, :-1, :] |= fine[::2, 1::2, :]
        pooled[:-1, :-1, :] |= fine[1::2, 1::2, :]
        pooled = pooled[:, :, ::2] | pooled[:, :, 1::2]  # z coarsens too
        out[parent] = build_block_assets(src, parent, layout, cfg, pooled)
    return out


# ---------------------------------------------------------------------------
# serialization


def _atlas_slot_grid(n_mb: int) -> int:
    return max(1, math.isqrt(n_mb - 1) + 1) if n_mb else 0


def _save_png(path: Path, arr: np.ndarray):
    Image.fromarray(arr, mode="RGBA").save(path, format="PNG")


def _load_png(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGBA"), dtype=np.uint8)


def export_assets(assets: BlockAssets, root: str | Path,
                  shader_group: str = "global") -> BlockEntry:
    """Write one block's assets under root/lod{l}/block_{ix}_{iy}/.

    Layout: the voxel atlas as z-major PNG slices with the 8 channels
    split over an RGBA pair per slice, each plane as one RGBA pair, and
    the occupancy pyramid as packed bits. Quantized data round-trips
    bit-exactly; repeated exports are byte-identical.
    """
    root = Path(root)
    d = root / f"lod{assets.block.lod}" / f"block_{assets.block.ix}_{assets.block.iy}"
    d.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    n_mb = assets.atlas.shape[0]
    if n_mb:
        s = _atlas_slot_grid(n_mb)
        rows = np.arange(n_mb) // s
        cols = np.arange(n_mb) % s
        for z in range(MACROBLOCK_EDGE):
            canvas = np.zeros((s * 8, s * 8, NUM_CHANNELS), dtype=np.uint8)
            tiles = assets.atlas[:, :, :, z, :].transpose(0, 2, 1, 3)  # slot, y, x, c
            for slot in range(n_mb):
                canvas[rows[slot] * 8 : rows[slot] * 8 + 8,
                       cols[slot] * 8 : cols[slot] * 8 + 8] = tiles[slot]
            p = d / f"atlas_z{z}_a.png"
            _save_png(p, canvas[:, :, :4])
            written.append(p)
            p = d / f"atlas_z{z}_b.png"
            _save_png(p, canvas[:, :, 4:])
            written.append(p)

    for name, plane in assets.planes.items():
        img = plane.transpose(1, 0, 2)  # rows follow the second plane axis
        p = d / f"plane_{name}_a.png"
        _save_png(p, img[:, :, :4])
        written.append(p)
        p = d / f"plane_{name}_b.png"
        _save_png(p, img[:, :, 4:])
        written.append(p)

    bits = b"".join(
        np.packbits(lvl.astype(np.uint8).ravel()).tobytes()
        for lvl in assets.occupancy.levels
    )
    p = d / "occupancy.bin"
    p.write_bytes(bits)
    written.append(p)

    files = {}
    hashes = {}
    for p in written:
        data = p.read_bytes()
        files[p.name] = len(data)
        hashes[p.name] = hashlib.sha256(data).hexdigest()
    return BlockEntry(
        block=assets.block,
        files=files,
        sha256=hashes,
        z_top=assets.z_top(),
        total_bytes=sum(files.values()),
        shader_group=shader_group,
        unbounded=assets.unbounded,
    )


def import_assets(manifest: SceneManifest, root: str | Path, block: BlockId) -> BlockAssets:
    """Load one block back; errors name any missing or size-mismatched file."""
    entry = manifest.blocks.get(block)
    if entry is None:
        raise KeyError(f"manifest has no block {block}")
    root = Path(root)
    d = root / manifest.block_dir(block)
    for name, size in entry.files.items():
        p = d / name
        if not p.exists():
            raise FileNotFoundError(f"asset file missing: {p}")
        actual = p.stat().st_size
        if actual != size:
            raise ValueError(f"asset file {p} has {actual} bytes, manifest says {size}")

    r = manifest.voxel_res
    rz = r >> (block.lod - 1)
    raw = (d / "occupancy.bin").read_bytes()
    levels = []
    offset = 0
    shape = (r, r, rz)
    for _ in range(manifest.pyramid_levels):
        cells = shape[0] * shape[1] * shape[2]
        nbytes = (cells + 7) // 8
        bits = np.unpackbits(np.frombuffer(raw[offset : offset + nbytes], dtype=np.uint8))
        levels.append(bits[:cells].astype(bool).reshape(shape))
        offset += nbytes
        shape = tuple(s // 2 for s in shape)
    occ0 = levels[0]

    indirection = macroblock_indirection(occ0)
    n_mb = int((indirection != EMPTY).sum())
    atlas = np.zeros((n_mb, 8, 8, 8, NUM_CHANNELS), dtype=np.uint8)
    if n_mb:
        s = _atlas_slot_grid(n_mb)
        rows = np.arange(n_mb) // s
        cols = np.arange(n_mb) % s
        for z in range(MACROBLOCK_EDGE):
            a = _load_png(d / f"atlas_z{z}_a.png")
            b = _load_png(d / f"atlas_z{z}_b.png")
            canvas = np.concatenate([a, b], axis=-1)
            for slot in range(n_mb):
                tile = canvas[rows[slot] * 8 : rows[slot] * 8 + 8,
                              cols[slot] * 8 : cols[slot] * 8 + 8]
                atlas[slot, :, :, z, :] = tile.transpose(1, 0, 2)

    planes = {}
    for name in PLANE_AXES:
        a = _load_png(d / f"plane_{name}_a.png")
        b = _load_png(d / f"plane_{name}_b.png")
        planes[name] = np.concatenate([a, b], axis=-1).transpose(1, 0, 2)

    return BlockAssets(
        block=block,
        voxel_res=r,
        triplane_res=manifest.triplane_res,
        atlas=atlas,
        indirection=indirection,
        planes=planes,
        occupancy=OccupancyPyramid(levels),
        quant=manifest.quant,
        bounds=manifest.layout.block_bounds(block),
        unbounded=entry.unbounded,
        voxel_res_z=rz,
    )


def default_thresholds(layout: BlockLayout) -> list[float]:
    """Per-level switch distances: twice the block diagonal at each level."""
    h = layout.z_range[1] - layout.z_range[0]
    return [
        2.0 * math.sqrt(2.0 * layout.edge_at(l) ** 2 + h ** 2)
        for l in range(1, layout.lod_count + 1)
    ]


def bake_scene(src: FieldSource, layout: BlockLayout, cameras: list[PinholeCamera],
               cfg: BakeConfig, out_root: str | Path,
               shader_weights: dict | None = None,
               background=(0.5, 0.5, 0.5), memory_budget: int | None = None,
               scene_spec_json: dict | None = None, workers: int = 1) -> SceneManifest:
    """Bake every level of a scene and write the asset tree + manifest."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    occ = mark_occupancy(src, layout, cfg, cameras)
    finest_blocks = layout.blocks_at(1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(
                lambda b: build_block_assets(src, b, layout, cfg, occ[b]), finest_blocks
            ))
        level = dict(zip(finest_blocks, built))
    else:
        level = {b: build_block_assets(src, b, layout, cfg, occ[b]) for b in finest_blocks}

    all_assets: dict[BlockId, BlockAssets] = dict(level)
    for _ in range(1, layout.lod_count):
        level = generate_lod(src, level, layout, cfg)
        all_assets.update(level)

    entries = {}
    for bid, assets in all_assets.items():
        entries[bid] = export_assets(assets, out_root, shader_group="global")

    from .assets import DeferredShaderWeights

    if shader_weights is None:
        shader_weights = {"global": DeferredShaderWeights.zeros()}
    groups = {}
    for group, w in shader_weights.items():
        fname = f"shader_{group}.json"
        (out_root / fname).write_text(json.dumps(w.to_json(), sort_keys=True))
        groups[group] = fname

    total = sum(e.total_bytes for e in entries.values())
    manifest = SceneManifest(
        layout=layout,
        quant=cfg.quant,
        voxel_res=cfg.voxel_res,
        triplane_res=cfg.triplane_res,
        pyramid_levels=cfg.pyramid_levels,
        blocks=entries,
        shader_groups=groups,
        lod_distance_thresholds=default_thresholds(layout),
        memory_budget=memory_budget if memory_budget is not None else 2 * total,
        background=tuple(background),
        plane_share=cfg.plane_share,
        bake_params={
            "tau_w": cfg.tau_w,
            "tau_a": cfg.tau_a,
            "ray_budget": cfg.ray_budget,
        },
        scene_spec=scene_spec_json,
    )
    manifest.save(out_root / "manifest.json")
    return manifest


def _bake_config_from_manifest(manifest: SceneManifest) -> BakeConfig:
    return BakeConfig(
        voxel_res=manifest.voxel_res,
        triplane_res=manifest.triplane_res,
        tau_w=float(manifest.bake_params.get("tau_w", 0.005)),
        tau_a=float(manifest.bake_params.get("tau_a", 0.005)),
        pyramid_levels=manifest.pyramid_levels,
        plane_share=manifest.plane_share,
        quant=manifest.quant,
        ray_budget=int(manifest.bake_params.get("ray_budget", 200_000)),
    )


def load_scene(root: str | Path, lod: int | None = None,
               blocks: list[BlockId] | None = None):
    """Load a baked scene for rendering (default: every finest-level block)."""
    from .assets import DeferredShaderWeights
    from .render import LoadedScene

    root = Path(root)
    manifest = SceneManifest.load(root / "manifest.json")
    if blocks is None:
        blocks = manifest.layout.blocks_at(lod if lod is not None else 1)
    loaded = {b: import_assets(manifest, root, b) for b in blocks}
    weights = {
        group: DeferredShaderWeights.from_json(json.loads((root / fname).read_text()))
        for group, fname in manifest.shader_groups.items()
    }
    group_of = {b: manifest.blocks[b].shader_group for b in blocks}
    return LoadedScene(
        layout=manifest.layout,
        blocks=loaded,
        weights=weights,
        group_of=group_of,
        background=manifest.background,
    ), manifest
