"""Pinhole camera: pose, intrinsics, ray generation and projection.

Convention: camera x points right, y down, z forward (image row 0 at
the top). `rotation` holds the camera axes as world-space columns, so
world = rotation @ cam + eye. World up is +z (heights).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PinholeCamera:
    rotation: np.ndarray  # (3, 3) world-from-camera
    eye: np.ndarray       # (3,)
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation must be orthonormal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "eye", np.asarray(self.eye, dtype=np.float64))
        if self.width < 1 or self.height < 1:
            raise ValueError("zero-area image")

    @staticmethod
    def look_at(
        eye, target, width: int, height: int, fov_deg: float = 60.0, up=(0.0, 0.0, 1.0)
    ) -> "PinholeCamera":
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        n = np.linalg.norm(forward)
        if n == 0:
            raise ValueError("eye and target coincide")
        forward = forward / n
        up = np.asarray(up, dtype=np.float64)
        right = np.cross(forward, up)
        if np.linalg.norm(right) < 1e-9:
            # looking straight along up; fall back to a horizontal reference
            right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
            if np.linalg.norm(right) < 1e-9:
                right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        right = right / np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward], axis=1)
        f = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2.0)
        return PinholeCamera(rot, eye, f, f, width / 2.0, height / 2.0, width, height)

    def ray_directions(self) -> np.ndarray:
        """Unit world-space direction per pixel, shape (H, W, 3), row-major."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        d = d_cam @ self.rotation.T
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """World points -> (u_px, v_px, z_cam). Points behind have z_cam <= 0."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        cam = (points - self.eye) @ self.rotation
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * cam[:, 0] / z + self.cx
            v = self.fy * cam[:, 1] / z + self.cy
        return u, v, z

    def to_json(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "eye": self.eye.tolist(),
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @staticmethod
    def from_json(data: dict) -> "PinholeCamera":
        if "rotation" in data:
            return PinholeCamera(
                np.array(data["rotation"]),
                np.array(data["eye"]),
                float(data["fx"]),
                float(data["fy"]),
                float(data["cx"]),
                float(data["cy"]),
                int(data["width"]),
                int(data["height"]),
            )
        # look-at form: eye/target/fov
        return PinholeCamera.look_at(
            data["eye"],
            data["target"],
            int(data["width"]),
            int(data["height"]),
            fov_deg=float(data.get("fov_deg", 60.0)),
            up=tuple(data.get("up", (0.0, 0.0, 1.0))),
        )


def load_camera(path: str | Path, width: int | None = None, height: int | None = None) -> PinholeCamera:
    """Read a camera pose file, optionally overriding the resolution."""
    data = json.loads(Path(path).read_text())
    if width is not None:
        data["width"] = width
    if height is not None:
        data["height"] = height
    if "rotation" in data and (width is not None or height is not None):
        # recentre the principal point when the resolution is overridden
        data["cx"] = data["width"] / 2.0
        data["cy"] = data["height"] / 2.0
    return PinholeCamera.from_json(data)
