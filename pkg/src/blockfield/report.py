"""Report rendering: delimited summaries plus matplotlib figures.

Every reporting path writes a CSV next to its figures so harnesses can
parse results without image decoding.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .assets import SceneManifest
from .synth import CameraPath, SceneSpec, build_field


def write_verify_report(results, equivalence_errors: np.ndarray, out_dir: str | Path) -> list[Path]:
    """verify_report.csv plus error-distribution figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "verify_report.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["suite", "passed", "trials", "max_error", "tolerance", "seconds", "detail"])
        for r in results:
            w.writerow([r.name, int(r.passed), r.trials, f"{r.max_error:.3e}",
                        f"{r.tolerance:.3e}", f"{r.seconds:.3f}", r.detail])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    errs = np.maximum(equivalence_errors, 1e-18)
    ax.hist(np.log10(errs), bins=60, color="#4878cf")
    ax.axvline(np.log10(1e-5), color="red", linestyle="--", label="tolerance")
    ax.set_xlabel("log10 |blocked - monolithic|")
    ax.set_ylabel("instances")
    ax.set_title("Segmented-integration equivalence error")
    ax.legend()
    fig.tight_layout()
    p = out / "equivalence_error_hist.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r.name for r in results]
    errors = [max(r.max_error, 1e-18) for r in results]
    tols = [max(r.tolerance, 1e-18) for r in results]
    x = np.arange(len(names))
    ax.bar(x - 0.2, errors, width=0.4, label="max error", color="#4878cf")
    ax.bar(x + 0.2, tols, width=0.4, label="tolerance", color="#d65f5f")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=15)
    ax.set_title("Verification suites: error vs tolerance")
    ax.legend()
    fig.tight_layout()
    p = out / "suite_errors.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)
    return written


def write_metrics_report(psnr_db: float, diff: np.ndarray, out_dir: str | Path) -> list[Path]:
    """metrics.csv plus a per-pixel difference heat map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        w.writerow(["psnr_db", f"{psnr_db:.4f}"])
        w.writerow(["mean_abs_diff", f"{diff.mean():.6f}"])
        w.writerow(["max_abs_diff", f"{diff.max():.6f}"])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(diff, cmap="magma")
    fig.colorbar(im, ax=ax, label="max |channel diff|")
    ax.set_title(f"PSNR {psnr_db:.2f} dB")
    ax.set_axis_off()
    fig.tight_layout()
    p = out / "diff_heatmap.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)
    return written


def write_lod_report(manifest: SceneManifest, out_dir: str | Path) -> list[Path]:
    """Per-level asset sizes: lod_sizes.csv and a bar chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = range(1, manifest.layout.lod_count + 1)
    totals = {
        l: sum(e.total_bytes for b, e in manifest.blocks.items() if b.lod == l)
        for l in levels
    }
    counts = {l: sum(1 for b in manifest.blocks if b.lod == l) for l in levels}
    written = []
    csv_path = out / "lod_sizes.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lod", "blocks", "bytes"])
        for l in levels:
            w.writerow([l, counts[l], totals[l]])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([str(l) for l in levels], [totals[l] / 1e6 for l in levels], color="#4878cf")
    ax.set_xlabel("LOD (1 = finest)")
    ax.set_ylabel("asset size (MB)")
    ax.set_title("Asset bytes per level")
    fig.tight_layout()
    p = out / "lod_sizes.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)
    return written


def scene_preview(spec: SceneSpec, path: CameraPath, out_png: str | Path,
                  resolution: int = 160) -> Path:
    """Top and side density projections of the field, with the capture orbit."""
    field = build_field(spec)
    lo, hi = spec.box()
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    zs = np.linspace(lo[2], hi[2], max(resolution // 4, 16))

    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    sigma, _, _ = field.activated(pts)
    vol = sigma.reshape(resolution, resolution, len(zs))

    fig, axes = plt.subplots(1, 2, figsize=(10, 4.5))
    top = vol.sum(axis=2).T
    axes[0].imshow(top, origin="lower", extent=(lo[0], hi[0], lo[1], hi[1]), cmap="viridis")
    angle = np.linspace(0, 2 * np.pi, 100)
    axes[0].plot(
        path.center[0] + path.radius * np.cos(angle),
        path.center[1] + path.radius * np.sin(angle),
        "w--", linewidth=1, label="capture orbit",
    )
    axes[0].set_title("density, top view")
    axes[0].legend(loc="lower right")
    side = vol.sum(axis=1).T
    axes[1].imshow(side, origin="lower", extent=(lo[0], hi[0], lo[2], hi[2]),
                   cmap="viridis", aspect="auto")
    axes[1].set_title("density, side view")
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
    return out_png
