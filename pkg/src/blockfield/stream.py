"""Streaming policy and asset service.

Selects which blocks to render for a camera (visibility culling plus
coarse-to-fine LOD descent), keeps the resident set inside a byte
budget with LRU eviction and farthest-first degradation, and serves
the baked asset tree over HTTP with Range and ETag support.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .assets import SceneManifest
from .camera import PinholeCamera
from .geometry import BlockId

VISIBILITY_SAMPLES = 17  # rectangle sampling density per edge


@dataclass(frozen=True)
class BlockRenderCenter:
    """Block center used for distances: xy center, z at the highest content."""

    block: BlockId
    center: np.ndarray


def render_center(manifest: SceneManifest, block: BlockId) -> np.ndarray:
    cx, cy = manifest.layout.block_center(block)
    return np.array([cx, cy, manifest.blocks[block].z_top])


@dataclass
class RenderPlan:
    """Depth-ordered blocks to draw, plus the load/evict deltas once applied."""

    blocks: list[BlockId]
    eye_xy: tuple[float, float] = (0.0, 0.0)
    to_load: list[BlockId] = field(default_factory=list)
    to_evict: list[BlockId] = field(default_factory=list)
    degraded: list[tuple[BlockId, BlockId]] = field(default_factory=list)
    dropped: list[BlockId] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "blocks": [b.key() for b in self.blocks],
            "to_load": [b.key() for b in self.to_load],
            "to_evict": [b.key() for b in self.to_evict],
            "degraded": [[a.key(), b.key()] for a, b in self.degraded],
            "dropped": [b.key() for b in self.dropped],
        }


@dataclass
class ResidentAsset:
    handle: object
    size: int
    last_used: int


@dataclass
class ResidentSet:
    """Loaded assets under a byte budget; recency drives eviction."""

    budget: int
    entries: dict[BlockId, ResidentAsset] = field(default_factory=dict)
    clock: int = 0

    @property
    def total_bytes(self) -> int:
        return sum(e.size for e in self.entries.values())

    def touch(self, block: BlockId):
        self.clock += 1
        self.entries[block].last_used = self.clock


def visible(camera: PinholeCamera, block: BlockId, manifest: SceneManifest) -> bool:
    """Conservative visibility of the block's top rectangle.

    True when any of a 17x17 sample grid of the rectangle (corners and
    edges included) projects into the image in front of the camera, or
    when the camera stands above the block's xy footprint.
    """
    lo, hi = manifest.layout.block_bounds(block)
    if lo[0] <= camera.eye[0] <= hi[0] and lo[1] <= camera.eye[1] <= hi[1]:
        return True
    z_top = manifest.blocks[block].z_top
    s = np.linspace(0.0, 1.0, VISIBILITY_SAMPLES)
    gx, gy = np.meshgrid(lo[0] + s * (hi[0] - lo[0]), lo[1] + s * (hi[1] - lo[1]))
    pts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z_top)], axis=1)
    u, v, z = camera.project(pts)
    in_img = (z > 0) & (u >= 0) & (u <= camera.width) & (v >= 0) & (v <= camera.height)
    if in_img.any():
        return True
    # wide blocks can straddle the image with every sample point outside it
    corners = pts[[0, VISIBILITY_SAMPLES - 1, -VISIBILITY_SAMPLES, -1]]
    cu, cv, cz = camera.project(corners)
    if np.all(cz > 0):
        if cu.min() <= camera.width and cu.max() >= 0 and cv.min() <= camera.height and cv.max() >= 0:
            return True
    return False


def depth_sort(blocks: list[BlockId], camera: PinholeCamera,
               manifest: SceneManifest) -> list[BlockId]:
    """Ascending xy distance from the camera to block centers; stable ties."""
    def key(b: BlockId):
        cx, cy = manifest.layout.block_center(b)
        return (float(np.hypot(cx - camera.eye[0], cy - camera.eye[1])), b.lod, b.iy, b.ix)

    return sorted(blocks, key=key)


def select_lod(camera: PinholeCamera, manifest: SceneManifest,
               thresholds: list[float] | None = None) -> RenderPlan:
    """Coarse-to-fine LOD selection.

    Starting from the coarsest level, a visible block farther from the
    camera than the next finer level's switch distance is emitted as
    is; otherwise its four children are considered, down to level 1.
    Emitted blocks come back depth-sorted; invisible blocks are culled.
    """
    if thresholds is None:
        thresholds = manifest.lod_distance_thresholds
    layout = manifest.layout
    if len(thresholds) != layout.lod_count:
        raise ValueError("one distance threshold per LOD required")
    if any(thresholds[i] >= thresholds[i + 1] for i in range(len(thresholds) - 1)):
        raise ValueError(
            f"thresholds must decrease strictly toward finer LODs: {thresholds}"
        )

    emitted: list[BlockId] = []

    def descend(block: BlockId):
        if not visible(camera, block, manifest):
            return
        if block.lod == 1:
            emitted.append(block)
            return
        dist = float(np.linalg.norm(render_center(manifest, block) - camera.eye))
        if dist > thresholds[block.lod - 2]:
            emitted.append(block)
        else:
            for child in block.children():
                descend(child)

    for top in layout.blocks_at(layout.lod_count):
        descend(top)
    return RenderPlan(
        blocks=depth_sort(emitted, camera, manifest),
        eye_xy=(float(camera.eye[0]), float(camera.eye[1])),
    )


def _ancestor(block: BlockId, lod: int) -> BlockId:
    shift = lod - block.lod
    return BlockId(lod, block.ix >> shift, block.iy >> shift)


def apply_plan(plan: RenderPlan, resident: ResidentSet, fetcher,
               manifest: SceneManifest) -> ResidentSet:
    """Reconcile the resident set with a plan under the byte budget.

    If the plan alone exceeds the budget, the farthest planned blocks
    are degraded to their coarser parents (absorbing planned siblings)
    until it fits; leftover budget keeps the most recently used
    unplanned assets. Fetches happen front-to-back. The plan's
    to_load / to_evict / degraded fields record what was done.
    """
    layout = manifest.layout
    budget = resident.budget
    ex, ey = plan.eye_xy

    def depth_key(b: BlockId):
        cx, cy = layout.block_center(b)
        return (float(np.hypot(cx - ex, cy - ey)), b.lod, b.iy, b.ix)

    def size_of(b: BlockId) -> int:
        return manifest.blocks[b].total_bytes

    # degrade farthest-first until the plan fits; a block too large for
    # the budget even at the coarsest level is an error
    blocks = sorted(plan.blocks, key=depth_key)
    while blocks and sum(size_of(b) for b in blocks) > budget:
        fine = [b for b in blocks if b.lod < layout.lod_count]
        if not fine:
            worst = max(blocks, key=size_of)
            if size_of(worst) > budget:
                raise ValueError(
                    f"asset {worst} ({size_of(worst)} bytes) exceeds the "
                    f"budget of {budget} bytes on its own"
                )
            plan.dropped.append(blocks.pop())  # all coarsest already
            continue
        victim = fine[-1]
        parent = _ancestor(victim, victim.lod + 1)
        absorbed = [b for b in blocks
                    if b.lod <= parent.lod and _ancestor(b, parent.lod) == parent]
        blocks = [b for b in blocks if b not in absorbed] + [parent]
        blocks = sorted(set(blocks), key=depth_key)
        for b in absorbed:
            plan.degraded.append((b, parent))
    plan.blocks = blocks

    planned = set(blocks)
    plan_bytes = sum(size_of(b) for b in blocks)
    leftover = budget - plan_bytes

    keep_unplanned = []
    unplanned = [b for b in resident.entries if b not in planned]
    unplanned.sort(key=lambda b: (-resident.entries[b].last_used, b.lod, b.iy, b.ix))
    for b in unplanned:
        sz = resident.entries[b].size
        if sz <= leftover:
            keep_unplanned.append(b)
            leftover -= sz
        else:
            plan.to_evict.append(b)

    for b in plan.to_evict:
        del resident.entries[b]

    for b in blocks:
        if b in resident.entries:
            resident.touch(b)
        else:
            handle = fetcher(b)
            resident.clock += 1
            resident.entries[b] = ResidentAsset(handle, size_of(b), resident.clock)
            plan.to_load.append(b)
    return resident


def plan_walk(manifest: SceneManifest, poses: list[PinholeCamera], budget: int,
              fetcher=None, thresholds: list[float] | None = None) -> list[dict]:
    """Run select/apply over a pose sequence; returns per-step actions."""
    resident = ResidentSet(budget=budget)
    fetcher = fetcher or (lambda b: b.key())
    steps = []
    for cam in poses:
        plan = select_lod(cam, manifest, thresholds)
        apply_plan(plan, resident, fetcher, manifest)
        steps.append(
            {
                **plan.to_json(),
                "resident": sorted(b.key() for b in resident.entries),
                "resident_bytes": resident.total_bytes,
            }
        )
    return steps


# ---------------------------------------------------------------------------
# HTTP asset service

_RANGE_RE = re.compile(r"^bytes=(\d*)-(\d*)$")
_BLOCK_PATH_RE = re.compile(r"^/lod\d+/block_\d+_\d+/[A-Za-z0-9_.]+$")

_CONTENT_TYPES = {
    ".json": "application/json",
    ".png": "image/png",
    ".bin": "application/octet-stream",
}


class AssetRequestHandler(BaseHTTPRequestHandler):
    """Serves manifest and block files with ETag revalidation and Range."""

    protocol_version = "HTTP/1.1"
    root: Path
    _etag_cache: dict
    _etag_lock: threading.Lock

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _resolve(self, path: str) -> Path | None:
        if path == "/manifest.json" or _BLOCK_PATH_RE.match(path) or (
            path.startswith("/shader_") and path.endswith(".json") and "/" not in path[1:]
        ):
            p = (self.root / path.lstrip("/")).resolve()
            if p.is_file() and str(p).startswith(str(self.root.resolve())):
                return p
        return None

    def _etag(self, p: Path) -> str:
        st = p.stat()
        key = (str(p), st.st_mtime_ns, st.st_size)
        with self._etag_lock:
            tag = self._etag_cache.get(key)
        if tag is None:
            tag = '"%s"' % hashlib.sha256(p.read_bytes()).hexdigest()
            with self._etag_lock:
                self._etag_cache[key] = tag
        return tag

    def _serve(self, send_body: bool):
        if self.path == "/healthz":
            body = b"ok"
            self.send_response(200)
            self.send_header("Content-Type", "text/plain")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if send_body:
                self.wfile.write(body)
            return
        p = self._resolve(self.path)
        if p is None:
            self.send_error(404, "not found")
            return
        etag = self._etag(p)
        if self.headers.get("If-None-Match") == etag:
            self.send_response(304)
            self.send_header("ETag", etag)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        data = p.read_bytes()
        ctype = _CONTENT_TYPES.get(p.suffix, "application/octet-stream")
        rng = self.headers.get("Range")
        if rng is not None:
            m = _RANGE_RE.match(rng.strip())
            if not m or (not m.group(1) and not m.group(2)):
                self._range_error(len(data))
                return
            if m.group(1):
                start = int(m.group(1))
                end = int(m.group(2)) if m.group(2) else len(data) - 1
            else:
                start = max(0, len(data) - int(m.group(2)))
                end = len(data) - 1
            if start >= len(data) or start > end:
                self._range_error(len(data))
                return
            end = min(end, len(data) - 1)
            chunk = data[start : end + 1]
            self.send_response(206)
            self.send_header("Content-Type", ctype)
            self.send_header("ETag", etag)
            self.send_header("Accept-Ranges", "bytes")
            self.send_header("Content-Range", f"bytes {start}-{end}/{len(data)}")
            self.send_header("Content-Length", str(len(chunk)))
            self.end_headers()
            if send_body:
                self.wfile.write(chunk)
            return
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("ETag", etag)
        self.send_header("Accept-Ranges", "bytes")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        if send_body:
            self.wfile.write(data)

    def do_GET(self):
        try:
            self._serve(send_body=True)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_HEAD(self):
        try:
            self._serve(send_body=False)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def end_headers(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        super().end_headers()

    def _range_error(self, size: int):
        self.send_response(416)
        self.send_header("Content-Range", f"bytes */{size}")
        self.send_header("Content-Length", "0")
        self.end_headers()


def serve(root: str | Path, addr: tuple[str, int]) -> ThreadingHTTPServer:
    """Create the asset server (caller runs serve_forever or a thread)."""
    root = Path(root)
    if not (root / "manifest.json").is_file():
        raise FileNotFoundError(f"no manifest.json under {root}")
    handler = type(
        "BoundAssetHandler",
        (AssetRequestHandler,),
        {"root": root, "_etag_cache": {}, "_etag_lock": threading.Lock()},
    )
    return ThreadingHTTPServer(addr, handler)


class HttpFetcher:
    """Fetch block assets from the HTTP service (for loader tests)."""

    def __init__(self, base_url: str, manifest: SceneManifest):
        self.base_url = base_url.rstrip("/")
        self.manifest = manifest

    def __call__(self, block: BlockId) -> dict[str, bytes]:
        import urllib.request

        entry = self.manifest.blocks[block]
        out = {}
        for name in entry.files:
            url = f"{self.base_url}/{self.manifest.block_dir(block)}/{name}"
            with urllib.request.urlopen(url) as r:
                out[name] = r.read()
        return out
