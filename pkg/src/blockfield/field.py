"""Ground-truth attribute field consumed by the baker.

A FieldSource is a pure function from world position to the 8
pre-activation channels (density, diffuse, feature). It replaces a
trained per-block query network; anything deterministic and finite
over the bounding box qualifies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codec import apply_activations
from .geometry import BlockId


@dataclass(frozen=True)
class FieldSource:
    fn: Callable[[np.ndarray], np.ndarray]
    bbox: tuple[np.ndarray, np.ndarray]
    unbounded_blocks: frozenset[BlockId] = field(default_factory=frozenset)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Pre-activations (N, 8) at world points; rejects non-finite output."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        pre = np.asarray(self.fn(points), dtype=np.float64)
        if pre.shape != (points.shape[0], 8):
            raise ValueError(f"field returned shape {pre.shape}, expected (N, 8)")
        bad = ~np.isfinite(pre).all(axis=1)
        if bad.any():
            i = int(np.nonzero(bad)[0][0])
            raise ValueError(f"field produced non-finite output at point {points[i].tolist()}")
        return pre

    def activated(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(sigma, diffuse, feature) with the same activations the renderer uses."""
        return apply_activations(self.sample(points))
