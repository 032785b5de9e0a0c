"""Verification suites for baked scenes.

Four suites back the `verify` command: randomized equivalence of
block-composited vs monolithic integration, the opacity product
identity, occupancy-skip soundness on a rendered frame, and asset
round-trip integrity (byte-stable re-export plus content hashes).
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assets import SceneManifest
from .bake import export_assets, import_assets, load_scene
from .render import accumulate, composite, render_frame
from .synth import orbit_path, parse_scene_json

EQUIVALENCE_TOL = 1e-5
OPACITY_TOL = 1e-6
SKIP_MEAN_TOL = 2.0 / 255.0
SKIP_MAX_TOL = 8.0 / 255.0


@dataclass
class SuiteResult:
    name: str
    passed: bool
    trials: int
    max_error: float
    tolerance: float
    seconds: float
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "seconds": round(self.seconds, 3),
            "detail": self.detail,
        }


def equivalence_errors(trials: int, seed: int = 0, max_blocks: int = 8,
                       max_samples: int = 32, chunk: int = 10_000) -> np.ndarray:
    """Per-trial max channel error between blocked and monolithic rendering.

    Random diffuse-only instances: up to `max_blocks` contiguous runs of
    up to `max_samples` samples each. Padding samples carry alpha 0 and
    contribute nothing, so ragged instances stay exact. Trials run in
    chunks to bound peak memory.
    """
    rng = np.random.default_rng(seed)
    k = max_blocks
    n = max_samples
    out = np.empty(trials)
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        alphas = rng.random((t, k, n))
        counts = rng.integers(0, n + 1, size=(t, k))
        mask = np.arange(n)[None, None, :] < counts[..., None]
        alphas = np.where(mask, alphas, 0.0)
        colors = rng.random((t, k, n, 3))

        cd_k, _, alpha_k = accumulate(alphas, colors)
        blocked, blocked_alpha = composite(alpha_k, cd_k)
        mono_cd, _, mono_alpha = accumulate(
            alphas.reshape(t, k * n), colors.reshape(t, k * n, 3)
        )
        err = np.abs(blocked - mono_cd).max(axis=1)
        out[done : done + t] = np.maximum(err, np.abs(blocked_alpha - mono_alpha))
        done += t
    return out


def run_equivalence(trials: int, seed: int = 0) -> SuiteResult:
    t0 = time.time()
    err = equivalence_errors(trials, seed)
    dt = time.time() - t0
    worst = float(err.max())
    return SuiteResult(
        name="equivalence",
        passed=worst <= EQUIVALENCE_TOL and int((err > EQUIVALENCE_TOL).sum()) == 0,
        trials=trials,
        max_error=worst,
        tolerance=EQUIVALENCE_TOL,
        seconds=dt,
        detail=f"{int((err > EQUIVALENCE_TOL).sum())} failures",
    )


def run_opacity_identity(trials: int, seed: int = 1) -> SuiteResult:
    t0 = time.time()
    rng = np.random.default_rng(seed)
    n = 32
    alphas = rng.random((trials, n))
    counts = rng.integers(0, n + 1, size=trials)
    alphas = np.where(np.arange(n)[None, :] < counts[:, None], alphas, 0.0)
    _, _, seg_alpha = accumulate(alphas)
    prod = np.prod(1.0 - alphas, axis=1)
    err = np.abs((1.0 - seg_alpha) - prod)
    worst = float(err.max())
    return SuiteResult(
        name="opacity-identity",
        passed=worst <= OPACITY_TOL,
        trials=trials,
        max_error=worst,
        tolerance=OPACITY_TOL,
        seconds=time.time() - t0,
    )


def run_skip_soundness(root: str | Path, scene_json: dict | None = None) -> SuiteResult:
    """Pyramid-enabled vs exhaustive render of a capture pose."""
    t0 = time.time()
    scene, manifest = load_scene(root)
    if scene_json is None:
        scene_json = manifest.scene_spec
    if scene_json is None:
        raise ValueError("no scene spec available for skip-soundness render")
    _, path, _ = parse_scene_json(scene_json)
    cam = orbit_path(path)[0]
    with_skip = render_frame(cam, scene, use_occupancy=True)
    without = render_frame(cam, scene, use_occupancy=False)
    diff = np.abs(with_skip.rgb - without.rgb).max(axis=-1)
    mean_err = float(diff.mean())
    max_err = float(diff.max())
    return SuiteResult(
        name="skip-soundness",
        passed=mean_err <= SKIP_MEAN_TOL and max_err <= SKIP_MAX_TOL,
        trials=cam.width * cam.height,
        max_error=max_err,
        tolerance=SKIP_MAX_TOL,
        seconds=time.time() - t0,
        detail=f"mean {mean_err:.6f} (tol {SKIP_MEAN_TOL:.6f})",
    )


def run_roundtrip(root: str | Path, workdir: str | Path) -> SuiteResult:
    """On-disk hashes match the manifest and a re-export is byte-identical."""
    t0 = time.time()
    root = Path(root)
    manifest = SceneManifest.load(root / "manifest.json")
    bad: list[str] = []
    for block, entry in manifest.blocks.items():
        d = root / manifest.block_dir(block)
        clean = True
        for name, digest in entry.sha256.items():
            actual = hashlib.sha256((d / name).read_bytes()).hexdigest()
            if actual != digest:
                bad.append(f"{d / name}: hash mismatch")
                clean = False
        if not clean:
            continue
        try:
            assets = import_assets(manifest, root, block)
            entry2 = export_assets(assets, workdir, shader_group=entry.shader_group)
        except (OSError, ValueError) as e:
            bad.append(f"{manifest.block_dir(block)}: unreadable ({e})")
            continue
        for name, digest in entry.sha256.items():
            if entry2.sha256.get(name) != digest:
                bad.append(f"{manifest.block_dir(block)}/{name}: re-export differs")
    return SuiteResult(
        name="round-trip",
        passed=not bad,
        trials=len(manifest.blocks),
        max_error=float(len(bad)),
        tolerance=0.0,
        seconds=time.time() - t0,
        detail="; ".join(bad[:3]),
    )


def verify_assets(root: str | Path, trials: int, workdir: str | Path,
                  scene_json: dict | None = None, seed: int = 0):
    """Run every suite; returns (results, equivalence error samples)."""
    if trials <= 0:
        raise ValueError("verification requires a positive trial count")
    errs = equivalence_errors(min(trials, 100_000), seed)
    results = [
        run_equivalence(trials, seed),
        run_opacity_identity(trials, seed + 1),
        run_roundtrip(root, workdir),
    ]
    try:
        results.append(run_skip_soundness(root, scene_json))
    except (OSError, ValueError) as e:
        # corrupt or unreadable assets: report the failure, don't crash
        results.append(SuiteResult(
            name="skip-soundness", passed=False, trials=0, max_error=float("inf"),
            tolerance=SKIP_MAX_TOL, seconds=0.0, detail=f"render failed: {e}",
        ))
    return results, errs
