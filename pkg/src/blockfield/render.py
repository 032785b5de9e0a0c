"""Block-based volume rendering.

Each block is ray-marched independently (front-to-back accumulation of
premultiplied diffuse color, specular feature and opacity); per-block
results are then composited in depth order so that occlusion across
blocks is correct. In the diffuse-only setting this factorization is
exactly equivalent to one monolithic accumulation over the merged
sample list, which `render_monolithic` provides as the test oracle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .assets import BlockAssets, BlockSampler, DeferredShaderWeights
from .camera import PinholeCamera
from .codec import apply_activations
from .geometry import BlockId, BlockLayout

EPS_TRANSMITTANCE = 1e-4
PSNR_CAP_DB = 99.0
VERTICAL_EPS = 1e-6


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float = 1e-6
    t_far: float = np.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"ray direction must be unit length, |d| = {n}")
        if not self.t_near < self.t_far:
            raise ValueError("require t_near < t_far")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class SamplePoint:
    """One integration sample: position parameter, step, attributes."""

    t: float
    delta: float
    sigma: float
    color: np.ndarray
    feature: np.ndarray

    @property
    def alpha(self) -> float:
        return float(1.0 - np.exp(-self.sigma * self.delta))


@dataclass
class RaySegmentResult:
    """Per-block integration output for one ray."""

    block: BlockId | None
    entry_t: float
    cdiff: np.ndarray   # premultiplied diffuse (3,)
    feature: np.ndarray  # premultiplied specular feature (4,)
    alpha: float
    shaded: np.ndarray | None = None  # set by deferred shading

    def __post_init__(self):
        if not -1e-9 <= self.alpha <= 1.0 + 1e-9:
            raise ValueError(f"segment opacity {self.alpha} outside [0, 1]")


@dataclass
class Framebuffer:
    rgb: np.ndarray    # (H, W, 3)
    alpha: np.ndarray  # (H, W)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    def to_uint8(self) -> np.ndarray:
        return np.round(np.clip(self.rgb, 0.0, 1.0) * 255.0).astype(np.uint8)

    def save_png(self, path: str | Path):
        Image.fromarray(self.to_uint8(), mode="RGB").save(path, format="PNG")

    def save_pfm(self, path: str | Path):
        save_pfm(path, self.rgb)


# ---------------------------------------------------------------------------
# accumulation and compositing cores


def accumulate(alphas: np.ndarray, colors: np.ndarray | None = None,
               features: np.ndarray | None = None):
    """Front-to-back accumulation over samples along the last axis.

    weights w_i = alpha_i * prod_{j<i}(1 - alpha_j); returns the
    premultiplied sums (C_d, F, alpha). Accepts any batch shape;
    padding samples with alpha 0 contributes exactly nothing.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    trans = np.cumprod(1.0 - alphas, axis=-1)
    t_excl = np.concatenate(
        [np.ones_like(trans[..., :1]), trans[..., :-1]], axis=-1
    )
    w = alphas * t_excl
    out_alpha = w.sum(axis=-1)
    cd = (w[..., None] * colors).sum(axis=-2) if colors is not None else None
    ft = (w[..., None] * features).sum(axis=-2) if features is not None else None
    return cd, ft, out_alpha


def composite(alphas: np.ndarray, values: np.ndarray):
    """Blend per-block results front-to-back along the second-to-last axis.

    C = sum_k prod_{j<k}(1 - alpha_j) * values_k, and the same
    transmittance weighting applied to the alphas themselves.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    trans = np.cumprod(1.0 - alphas, axis=-1)
    t_excl = np.concatenate([np.ones_like(trans[..., :1]), trans[..., :-1]], axis=-1)
    out = (t_excl[..., None] * values).sum(axis=-2)
    out_alpha = (t_excl * alphas).sum(axis=-1)
    return out, out_alpha


def composite_blocks(segments: list[RaySegmentResult], mode: str = "shaded"):
    """Blend depth-ordered per-block segments (front-to-back).

    mode "shaded": uses each segment's shaded color, returns (C, alpha).
    mode "diffuse": blends the premultiplied (C_d, F) channels instead,
    returning (C_d, F, alpha) for the oracle / post-composite pipeline.
    """
    for seg in segments:
        if not 0.0 <= seg.alpha <= 1.0:
            raise ValueError(f"segment opacity {seg.alpha} outside [0, 1]")
    alphas = np.array([seg.alpha for seg in segments])
    if mode == "shaded":
        missing = [s.block for s in segments if s.shaded is None]
        if missing:
            raise ValueError(f"segments not shaded yet: {missing}")
        vals = np.array([seg.shaded for seg in segments]).reshape(-1, 3)
        if len(segments) == 0:
            return np.zeros(3), 0.0
        c, a = composite(alphas, vals)
        return c, float(a)
    if mode == "diffuse":
        if len(segments) == 0:
            return np.zeros(3), np.zeros(4), 0.0
        cd = np.array([seg.cdiff for seg in segments]).reshape(-1, 3)
        ft = np.array([seg.feature for seg in segments]).reshape(-1, 4)
        joined = np.concatenate([cd, ft], axis=1)
        out, a = composite(alphas, joined)
        return out[:3], out[3:], float(a)
    raise ValueError(f"unknown composite mode {mode!r}")


# ---------------------------------------------------------------------------
# deferred shading


def positional_encoding(dirs: np.ndarray, bands: int) -> np.ndarray:
    """sin/cos of the direction at octave scales 2^0 .. 2^(bands-1)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    parts = []
    for b in range(bands):
        s = dirs * (2.0 ** b)
        parts.append(np.sin(s))
        parts.append(np.cos(s))
    return np.concatenate(parts, axis=-1)


def eval_shader(weights: DeferredShaderWeights, cdiff: np.ndarray,
                feature: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Residual color from the tiny view-dependent MLP, batched over rays."""
    cdiff = np.atleast_2d(cdiff)
    feature = np.atleast_2d(feature)
    pe = positional_encoding(dirs, weights.freq_bands)
    if pe.shape[0] == 1 and cdiff.shape[0] > 1:
        pe = np.broadcast_to(pe, (cdiff.shape[0], pe.shape[1]))
    x = np.concatenate([cdiff, feature, pe], axis=-1)
    h = np.maximum(x @ weights.w0 + weights.b0, 0.0)
    h = np.maximum(h @ weights.w1 + weights.b1, 0.0)
    return h @ weights.w2 + weights.b2


def deferred_shade(seg: RaySegmentResult, d: np.ndarray,
                   weights: DeferredShaderWeights) -> np.ndarray:
    """Apply the view-dependent residual to one segment; returns the color."""
    d = np.asarray(d, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("view direction must be unit length")
    residual = eval_shader(weights, seg.cdiff, seg.feature, d[None])[0]
    seg.shaded = np.clip(seg.cdiff + residual, 0.0, 1.0)
    return seg.shaded


# ---------------------------------------------------------------------------
# per-block ray marching


def ray_aabb(origins, dirs, lo, hi, t_near, t_far):
    """Entry/exit parameters against a box; miss leaves t0 >= t1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        ta = (lo - origins) * inv
        tb = (hi - origins) * inv
    tmin = np.where(np.isnan(ta), -np.inf, np.minimum(ta, tb)).max(axis=-1)
    tmax = np.where(np.isnan(tb), np.inf, np.maximum(ta, tb)).min(axis=-1)
    return np.maximum(tmin, t_near), np.minimum(tmax, t_far)


def march_rays_block(origins: np.ndarray, dirs: np.ndarray, sampler: BlockSampler,
                     t_near=1e-6, t_far=np.inf, eps_t: float = EPS_TRANSMITTANCE,
                     use_occupancy: bool = True, active: np.ndarray | None = None):
    """March a batch of rays through one block.

    Samples sit at t_entry + (i + 0.5) * delta with delta equal to the
    voxel width, so the per-block sample multiset merged over blocks
    equals a monolithic march of the same scene. Occupied cells are
    integrated; empty space is skipped at the coarsest occupancy
    pyramid level whose covering entries are all empty.
    """
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    n = origins.shape[0]
    lo3 = sampler.lo
    hi3 = sampler.hi
    t0, t1 = ray_aabb(origins, dirs, lo3, hi3, t_near, t_far)
    delta = sampler.assets.voxel_width
    count = np.maximum(np.floor((t1 - t0) / delta + 0.5), 0.0)
    hit = t1 > t0
    if active is not None:
        hit &= active
    count = np.where(hit, count, 0.0)

    res3 = sampler.res3
    # the grid mapping is affine inside the box, so track positions in
    # grid space: g(i) = g0 + (i + 0.5) * gstep
    half = 2.0 if sampler.unbounded else 1.0
    gstep = dirs * ((res3 - 1) / (half * (hi3 - lo3))) * delta
    t0_safe = np.where(np.isfinite(t0), t0, 0.0)
    g0 = sampler.grid_coords(origins + t0_safe[:, None] * dirs, res3)

    cd = np.zeros((n, 3))
    ft = np.zeros((n, 4))
    acc = np.zeros(n)
    trans = np.ones(n)
    idx = np.zeros(n, dtype=np.float64)

    if use_occupancy:
        # clip the lattice range to the occupied-cell bounding box (padded
        # one cell); everything outside sits in unoccupied cells and would
        # be skipped sample by sample anyway
        if sampler.occ_cell_lo is None:
            count = np.zeros(n)
        else:
            pad_lo = sampler.occ_cell_lo - 1.0
            pad_hi = sampler.occ_cell_hi + 2.0
            with np.errstate(divide="ignore", invalid="ignore"):
                sa = (pad_lo - g0) / gstep
                sb = (pad_hi - g0) / gstep
            lo_s = np.minimum(sa, sb)
            hi_s = np.maximum(sa, sb)
            still = np.abs(gstep) < 1e-12
            inside = (g0 >= pad_lo) & (g0 <= pad_hi)
            lo_s = np.where(still, np.where(inside, -np.inf, np.inf), lo_s)
            hi_s = np.where(still, np.where(inside, np.inf, -np.inf), hi_s)
            s_in = lo_s.max(axis=1)
            s_out = hi_s.min(axis=1)
            crosses = s_out > s_in
            idx = np.where(crosses, np.maximum(np.ceil(s_in - 0.5 - 1e-9), 0.0), 0.0)
            count = np.where(crosses, np.minimum(count, np.floor(s_out - 0.5) + 1.0), 0.0)

    # compacted live-ray set: per-iteration work tracks survivors only
    li = np.nonzero(hit & (idx < count))[0]
    while li.size:
        s = idx[li] + 0.5
        g = np.clip(g0[li] + s[:, None] * gstep[li], 0.0, res3 - 1)
        cell = np.clip(np.floor(g).astype(np.int64), 0, res3 - 2)

        if use_occupancy:
            lvl = sampler.skip_level[cell[:, 0], cell[:, 1], cell[:, 2]]
            occ = lvl < 0
        else:
            # exhaustive mode: still honor the EMPTY-indirection contract
            # (uncovered cells read as sigma 0), march every lattice point
            occ = sampler.cell_covered[cell[:, 0], cell[:, 1], cell[:, 2]]

        if occ.any():
            oi = li[occ]
            pre = sampler.pre_from_grid(g[occ], cell[occ])
            sigma, color, feat = apply_activations(pre)
            alpha = 1.0 - np.exp(-sigma * delta)
            w = trans[oi] * alpha
            cd[oi] += w[:, None] * color
            ft[oi] += w[:, None] * feat
            acc[oi] += w
            trans[oi] *= 1.0 - alpha
            idx[oi] += 1.0

        if not occ.all():
            emp = ~occ
            si = li[emp]
            if use_occupancy:
                lv = lvl[emp].astype(np.int64)[:, None]
                c = cell[emp]
                blo = (c >> lv) << lv
                bhi = (((c + 1) >> lv) + 1) << lv
                # steps until g leaves the safe empty region [blo, bhi - 1]
                gs = g[emp]
                dgs = gstep[si]
                with np.errstate(divide="ignore", invalid="ignore"):
                    s_pos = (bhi - 1.0 - gs) / dgs
                    s_neg = (blo - gs) / dgs
                s_axis = np.where(dgs > 0, s_pos, np.where(dgs < 0, s_neg, np.inf))
                s_step = np.min(np.where(np.isfinite(s_axis), s_axis, np.inf), axis=1)
                s_exit = s[emp] + np.maximum(s_step, 0.0)
                jump = np.ceil(s_exit - 0.5 - 1e-9)
                idx[si] = np.maximum(idx[si] + 1.0, jump)
            else:
                idx[si] += 1.0

        li = li[(idx[li] < count[li]) & (trans[li] > eps_t)]

    # exact arithmetic keeps acc <= 1; clip the float rounding drift
    return {
        "cdiff": cd,
        "feature": ft,
        "alpha": np.minimum(acc, 1.0),
        "entry_t": t0,
        "hit": hit & (count > 0),
    }


def march_block(ray: Ray, assets: BlockAssets, eps_t: float = EPS_TRANSMITTANCE,
                use_occupancy: bool = True) -> RaySegmentResult:
    """Integrate one ray through one block; misses yield a zero segment."""
    out = march_rays_block(
        ray.origin[None], ray.direction[None], assets.sampler(),
        t_near=ray.t_near, t_far=ray.t_far, eps_t=eps_t, use_occupancy=use_occupancy,
    )
    if not out["hit"][0]:
        return RaySegmentResult(assets.block, np.inf, np.zeros(3), np.zeros(4), 0.0)
    return RaySegmentResult(
        assets.block, float(out["entry_t"][0]),
        out["cdiff"][0], out["feature"][0], float(out["alpha"][0]),
    )


# ---------------------------------------------------------------------------
# scene-level rendering


@dataclass
class LoadedScene:
    """Blocks resident for rendering plus their shading weights."""

    layout: BlockLayout
    blocks: dict[BlockId, BlockAssets]
    weights: dict[str, DeferredShaderWeights] = field(default_factory=dict)
    group_of: dict[BlockId, str] = field(default_factory=dict)
    background: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def weights_for(self, block: BlockId) -> DeferredShaderWeights:
        group = self.group_of.get(block, "global")
        w = self.weights.get(group)
        if w is None:
            w = DeferredShaderWeights.zeros()
            self.weights[group] = w
        return w

    def global_weights(self) -> DeferredShaderWeights:
        if "global" in self.weights:
            return self.weights["global"]
        if self.weights:
            return next(iter(self.weights.values()))
        return DeferredShaderWeights.zeros()


def order_blocks(scene: LoadedScene, origin: np.ndarray) -> list[BlockId]:
    """Front-to-back block order by xy distance from the ray origin."""
    def key(b: BlockId):
        cx, cy = scene.layout.block_center(b)
        d = np.hypot(cx - origin[0], cy - origin[1])
        return (d, b.lod, b.iy, b.ix)

    return sorted(scene.blocks, key=key)


def render_ray(ray: Ray, scene: LoadedScene, mode: str = "per-block",
               eps_t: float = EPS_TRANSMITTANCE, use_occupancy: bool = True,
               background: tuple[float, float, float] | None = None):
    """March every resident block, depth-sort, shade and composite.

    Returns (color, alpha). Blocks are ordered by block-center xy
    distance to the ray origin; rays within 1e-6 of vertical fall back
    to entry-t ordering. The background is blended with weight 1-alpha.
    """
    bg = np.asarray(background if background is not None else scene.background)
    segments = []
    for bid in order_blocks(scene, ray.origin):
        seg = march_block(ray, scene.blocks[bid], eps_t=eps_t, use_occupancy=use_occupancy)
        if np.isfinite(seg.entry_t):
            segments.append(seg)
    if np.hypot(ray.direction[0], ray.direction[1]) < VERTICAL_EPS:
        segments.sort(key=lambda s: s.entry_t)
    segments = [s for s in segments if s.alpha > 0.0 or np.any(s.cdiff != 0.0)]
    if not segments:
        return bg.copy(), 0.0
    if mode == "per-block":
        for seg in segments:
            deferred_shade(seg, ray.direction, scene.weights_for(seg.block))
        color, alpha = composite_blocks(segments, mode="shaded")
    elif mode == "post-composite":
        cdiff, feat, alpha = composite_blocks(segments, mode="diffuse")
        w = scene.global_weights()
        residual = eval_shader(w, cdiff, feat, ray.direction[None])[0]
        color = np.clip(cdiff + residual, 0.0, 1.0)
    else:
        raise ValueError(f"unknown shading mode {mode!r}")
    color = color + max(1.0 - alpha, 0.0) * bg
    return color, float(alpha)


def render_monolithic(t: np.ndarray, alphas: np.ndarray, colors: np.ndarray,
                      features: np.ndarray | None = None,
                      view_dir: np.ndarray | None = None,
                      weights: DeferredShaderWeights | None = None,
                      background=None):
    """Single front-to-back pass over a merged, t-sorted sample list.

    The oracle for block-partitioned rendering: no block boundaries,
    one optional deferred shade at the end. Raises on unsorted input.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError("expected a flat sample list")
    if np.any(np.diff(t) < 0):
        raise ValueError("sample list is not sorted by t")
    cd, ft, alpha = accumulate(
        np.asarray(alphas, dtype=np.float64),
        np.asarray(colors, dtype=np.float64),
        np.asarray(features, dtype=np.float64) if features is not None else None,
    )
    color = cd
    if weights is not None:
        if view_dir is None:
            raise ValueError("view_dir required for deferred shading")
        if ft is None:
            ft = np.zeros(4)
        residual = eval_shader(weights, cd, ft, np.asarray(view_dir)[None])[0]
        color = np.clip(cd + residual, 0.0, 1.0)
    if background is not None:
        color = color + max(1.0 - alpha, 0.0) * np.asarray(background)
    return color, float(alpha)


def render_frame(camera: PinholeCamera, scene: LoadedScene, mode: str = "per-block",
                 eps_t: float = EPS_TRANSMITTANCE, use_occupancy: bool = True,
                 background: tuple[float, float, float] | None = None,
                 workers: int = 1) -> Framebuffer:
    """Render one frame; deterministic for fixed inputs.

    All rays share the camera origin, so the depth order of blocks is
    computed once per frame. With workers > 1 the image is split into
    disjoint row tiles, one writer per tile.
    """
    bg = np.asarray(background if background is not None else scene.background)
    dirs_img = camera.ray_directions()
    h, w = dirs_img.shape[:2]
    order = order_blocks(scene, camera.eye)

    def run_tile(rows: slice):
        dirs = dirs_img[rows].reshape(-1, 3)
        n = dirs.shape[0]
        origins = np.broadcast_to(camera.eye, (n, 3))
        color = np.zeros((n, 3))
        cdiff = np.zeros((n, 3))
        feat = np.zeros((n, 4))
        acc = np.zeros(n)
        trans = np.ones(n)
        for bid in order:
            live = trans > eps_t
            if not live.any():
                break
            out = march_rays_block(
                origins, dirs, scene.blocks[bid].sampler(),
                eps_t=eps_t, use_occupancy=use_occupancy, active=live,
            )
            seg_alpha = out["alpha"]
            contrib = out["hit"] & ((seg_alpha > 0) | np.any(out["cdiff"] != 0, axis=1))
            if not contrib.any():
                continue
            ci = np.nonzero(contrib)[0]
            if mode == "per-block":
                wts = scene.weights_for(bid)
                residual = eval_shader(wts, out["cdiff"][ci], out["feature"][ci], dirs[ci])
                shaded = np.clip(out["cdiff"][ci] + residual, 0.0, 1.0)
                color[ci] += trans[ci, None] * shaded
            else:
                cdiff[ci] += trans[ci, None] * out["cdiff"][ci]
                feat[ci] += trans[ci, None] * out["feature"][ci]
            acc[ci] += trans[ci] * seg_alpha[ci]
            trans[ci] *= 1.0 - seg_alpha[ci]
        if mode == "post-composite":
            wts = scene.global_weights()
            residual = eval_shader(wts, cdiff, feat, dirs)
            color = np.clip(cdiff + residual, 0.0, 1.0)
        elif mode != "per-block":
            raise ValueError(f"unknown shading mode {mode!r}")
        color = color + np.maximum(1.0 - acc, 0.0)[:, None] * bg
        rows_n = dirs.shape[0] // w
        return color.reshape(rows_n, w, 3), acc.reshape(rows_n, w)

    if workers <= 1:
        rgb, alpha = run_tile(slice(0, h))
        return Framebuffer(rgb, alpha)
    rgb = np.zeros((h, w, 3))
    alpha = np.zeros((h, w))
    step = max(1, h // workers)
    tiles = [slice(r, min(r + step, h)) for r in range(0, h, step)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for tile, (c, a) in zip(tiles, pool.map(run_tile, tiles)):
            rgb[tile] = c
            alpha[tile] = a
    return Framebuffer(rgb, alpha)


def render_frame_field(camera: PinholeCamera, src, layout: BlockLayout,
                       voxel_res: int, background=(0.5, 0.5, 0.5), lod: int = 1,
                       eps_t: float = EPS_TRANSMITTANCE) -> Framebuffer:
    """Reference render straight from the analytic field.

    Uses the identical per-block sample lattice as the baked renderer,
    querying the field instead of textures, so quantization and
    occupancy remain the only differences against a baked render.
    """
    dirs_img = camera.ray_directions()
    h, w = dirs_img.shape[:2]
    dirs = dirs_img.reshape(-1, 3)
    n = dirs.shape[0]
    origins = np.broadcast_to(camera.eye, (n, 3))
    color = np.zeros((n, 3))
    acc = np.zeros(n)
    trans = np.ones(n)
    bg = np.asarray(background)

    def key(b):
        cx, cy = layout.block_center(b)
        return (np.hypot(cx - camera.eye[0], cy - camera.eye[1]), b.lod, b.iy, b.ix)

    for bid in sorted(layout.blocks_at(lod), key=key):
        live = trans > eps_t
        if not live.any():
            break
        lo, hi = layout.block_bounds(bid)
        delta = (hi[0] - lo[0]) / (voxel_res - 1)
        t0, t1 = ray_aabb(origins, dirs, lo, hi, 1e-6, np.inf)
        count = np.where(live & (t1 > t0), np.floor((t1 - t0) / delta + 0.5), 0.0)
        idx = np.zeros(n)
        alive = idx < count
        while alive.any():
            li = np.nonzero(alive)[0]
            t = t0[li] + (idx[li] + 0.5) * delta
            p = origins[li] + t[:, None] * dirs[li]
            sigma, cdif, _ = src.activated(p)
            alpha = 1.0 - np.exp(-sigma * delta)
            wgt = trans[li] * alpha
            color[li] += wgt[:, None] * cdif
            acc[li] += wgt
            trans[li] *= 1.0 - alpha
            idx[li] += 1.0
            alive = (idx < count) & (trans > eps_t)
    color = color + np.maximum(1.0 - acc, 0.0)[:, None] * bg
    return Framebuffer(color.reshape(h, w, 3), acc.reshape(h, w))


# ---------------------------------------------------------------------------
# metrics and image IO


def psnr(a, b) -> float:
    """PSNR in dB over rgb in [0, 1]; identical inputs report the 99 dB cap."""
    ra = a.rgb if isinstance(a, Framebuffer) else np.asarray(a)
    rb = b.rgb if isinstance(b, Framebuffer) else np.asarray(b)
    if ra.shape != rb.shape:
        raise ValueError(f"image shapes differ: {ra.shape} vs {rb.shape}")
    mse = float(np.mean((ra - rb) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def save_pfm(path: str | Path, rgb: np.ndarray):
    """Lossless float image (PFM, little-endian, rows bottom to top)."""
    rgb = np.asarray(rgb, dtype=np.float32)
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(b"PF\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(rgb[::-1].tobytes())


def load_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"PF":
            raise ValueError(f"{path}: not a color PFM file")
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        data = np.frombuffer(f.read(), dtype="<f4" if scale < 0 else ">f4")
    return data.reshape(h, w, 3)[::-1].astype(np.float32)


def load_png(path: str | Path) -> np.ndarray:
    """8-bit PNG -> float rgb in [0, 1]."""
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    return arr / 255.0
