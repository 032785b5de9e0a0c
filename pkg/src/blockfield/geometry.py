"""Scene partition: a uniform xy grid of blocks with an LOD hierarchy.

The scene is split on the ground plane only. A block at level ``lod``
(1 = finest) covers ``2^(lod-1)`` finest blocks per axis, so merging
2x2 blocks between consecutive levels is exact. Heights are never
subdivided; every block spans the full z range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OutOfDomainError(ValueError):
    """A query point lies outside the scene's xy bounds."""


@dataclass(frozen=True)
class BlockLayout:
    """Uniform xy partition of the scene into blocks.

    origin: world xy corner of block (0, 0), meters.
    block_size: xy edge length of one finest-level block, meters.
    grid_dims: (nx, ny) finest-level block counts.
    z_range: (z_min, z_max) world height bounds shared by all blocks.
    lod_count: number of levels; nx and ny must be divisible by
        2^(lod_count - 1) so 2x2 merges are defined at every level.
    """

    origin: tuple[float, float]
    block_size: float
    grid_dims: tuple[int, int]
    z_range: tuple[float, float]
    lod_count: int = 1

    def __post_init__(self):
        nx, ny = self.grid_dims
        if self.block_size <= 0:
            raise ValueError(f"block_size must be positive, got {self.block_size}")
        if self.z_range[1] <= self.z_range[0]:
            raise ValueError(f"z_range must satisfy z_max > z_min, got {self.z_range}")
        if nx < 1 or ny < 1:
            raise ValueError(f"grid_dims must be >= 1, got {self.grid_dims}")
        if self.lod_count < 1:
            raise ValueError(f"lod_count must be >= 1, got {self.lod_count}")
        m = 2 ** (self.lod_count - 1)
        if nx % m or ny % m:
            raise ValueError(
                f"grid_dims {self.grid_dims} not divisible by 2^(L-1)={m}"
            )

    def dims_at(self, lod: int) -> tuple[int, int]:
        """Block counts (nx, ny) at the given level."""
        self._check_lod(lod)
        s = 2 ** (lod - 1)
        return self.grid_dims[0] // s, self.grid_dims[1] // s

    def edge_at(self, lod: int) -> float:
        """xy edge length of one block at the given level."""
        self._check_lod(lod)
        return self.block_size * 2 ** (lod - 1)

    def blocks_at(self, lod: int) -> list["BlockId"]:
        nx, ny = self.dims_at(lod)
        return [BlockId(lod, ix, iy) for iy in range(ny) for ix in range(nx)]

    def block_center(self, block: "BlockId") -> tuple[float, float]:
        e = self.edge_at(block.lod)
        return (
            self.origin[0] + (block.ix + 0.5) * e,
            self.origin[1] + (block.iy + 0.5) * e,
        )

    def block_bounds(self, block: "BlockId") -> tuple[np.ndarray, np.ndarray]:
        """World AABB (min, max) of the block, z spanning the full range."""
        e = self.edge_at(block.lod)
        lo = np.array(
            [self.origin[0] + block.ix * e, self.origin[1] + block.iy * e, self.z_range[0]]
        )
        hi = np.array([lo[0] + e, lo[1] + e, self.z_range[1]])
        return lo, hi

    def xy_extent(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) of the whole layout."""
        nx, ny = self.grid_dims
        return (
            self.origin[0],
            self.origin[1],
            self.origin[0] + nx * self.block_size,
            self.origin[1] + ny * self.block_size,
        )

    def _check_lod(self, lod: int):
        if not 1 <= lod <= self.lod_count:
            raise ValueError(f"lod {lod} outside [1, {self.lod_count}]")


@dataclass(frozen=True, order=True)
class BlockId:
    """Position of one block in the hierarchy. lod 1 is finest."""

    lod: int
    ix: int
    iy: int

    def parent(self) -> "BlockId":
        return BlockId(self.lod + 1, self.ix // 2, self.iy // 2)

    def children(self) -> list["BlockId"]:
        if self.lod <= 1:
            raise ValueError("finest-level block has no children")
        l = self.lod - 1
        return [
            BlockId(l, 2 * self.ix + dx, 2 * self.iy + dy)
            for dy in (0, 1)
            for dx in (0, 1)
        ]

    def key(self) -> str:
        return f"l{self.lod}_{self.ix}_{self.iy}"

    @staticmethod
    def from_key(key: str) -> "BlockId":
        lod, ix, iy = key[1:].split("_")
        return BlockId(int(lod), int(ix), int(iy))


def assign_block(p, layout: BlockLayout, lod: int = 1) -> BlockId:
    """Map a world point to its block at the given level.

    The block is the one whose center minimizes the L-inf distance to
    the point's xy projection; on a uniform grid this is index
    arithmetic on (p - origin) / edge. Points exactly on a shared
    boundary are equidistant from both centers and go to the smaller
    (iy, ix) index, which ceil(u) - 1 yields per axis.
    """
    nx, ny = layout.dims_at(lod)
    e = layout.edge_at(lod)
    u = (float(p[0]) - layout.origin[0]) / e
    v = (float(p[1]) - layout.origin[1]) / e
    if not (0.0 <= u <= nx and 0.0 <= v <= ny):
        raise OutOfDomainError(
            f"point xy=({p[0]}, {p[1]}) outside layout domain {layout.xy_extent()}"
        )
    ix = min(max(math.ceil(u) - 1, 0), nx - 1)
    iy = min(max(math.ceil(v) - 1, 0), ny - 1)
    return BlockId(lod, ix, iy)


def contract(x) -> np.ndarray:
    """Squash unbounded coordinates into the open L-inf ball of radius 2.

    Identity inside the unit L-inf ball. Outside it, coordinates at the
    maximum magnitude map to (2 - 1/|x_j|) sign(x_j) and the rest are
    scaled by 1/||x||_inf. Continuous everywhere; accepts (..., 3).
    """
    x = np.asarray(x, dtype=np.float64)
    mag = np.abs(x)
    m = np.max(mag, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = x / m
        on_max = (2.0 - 1.0 / np.maximum(mag, 1.0)) * np.sign(x)
    out = np.where(mag >= m, on_max, scaled)
    return np.where(m <= 1.0, x, out)


def uncontract(y) -> np.ndarray:
    """Inverse of :func:`contract` on its image (||y||_inf < 2)."""
    y = np.asarray(y, dtype=np.float64)
    mag = np.abs(y)
    mu = np.max(mag, axis=-1, keepdims=True)
    if np.any(mu >= 2.0):
        raise ValueError("uncontract requires ||y||_inf < 2")
    m = 1.0 / (2.0 - mu)
    on_max = np.sign(y) * m
    scaled = y * m
    out = np.where(mag >= mu, on_max, scaled)
    return np.where(mu <= 1.0, y, out)
