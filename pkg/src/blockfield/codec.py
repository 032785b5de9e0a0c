"""Texel codec: 8-bit quantization of pre-activation values, plus the
activations that turn stored texels into density / color / feature.

Channel layout is fixed at 8: channel 0 is the density pre-activation
(positive density via exp, clamped), channels 1-3 diffuse color and
4-7 specular feature (both through a logistic sigmoid).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NUM_CHANNELS = 8
DENSITY_MAX = 1.0e4

# Default pre-activation ranges: density, then color/feature.
DENSITY_RANGE = (-10.0, 10.0)
COLOR_RANGE = (-7.0, 7.0)


@dataclass(frozen=True)
class QuantizationSpec:
    """Per-channel (lo, hi) pre-activation bounds for the 8-bit codec."""

    ranges: tuple[tuple[float, float], ...] = field(
        default=(DENSITY_RANGE,) + (COLOR_RANGE,) * 7
    )

    def __post_init__(self):
        if len(self.ranges) != NUM_CHANNELS:
            raise ValueError(f"expected {NUM_CHANNELS} channel ranges")
        for lo, hi in self.ranges:
            if not hi > lo:
                raise ValueError(f"bad channel range ({lo}, {hi})")

    def lows(self) -> np.ndarray:
        return np.array([r[0] for r in self.ranges])

    def highs(self) -> np.ndarray:
        return np.array([r[1] for r in self.ranges])

    def to_json(self) -> list[list[float]]:
        return [list(r) for r in self.ranges]

    @staticmethod
    def from_json(data) -> "QuantizationSpec":
        return QuantizationSpec(tuple((float(lo), float(hi)) for lo, hi in data))


def quantize(x, lo: float, hi: float) -> np.ndarray:
    """Map pre-activation values to 8-bit codes: round(255 (clamp(x)-lo)/(hi-lo))."""
    x = np.clip(np.asarray(x, dtype=np.float64), lo, hi)
    return np.round(255.0 * (x - lo) / (hi - lo)).astype(np.uint8)


def dequantize(code, lo: float, hi: float) -> np.ndarray:
    """Affine inverse of :func:`quantize` at the code midpoint."""
    return lo + (hi - lo) * (np.asarray(code, dtype=np.float64) / 255.0)


def quantize_channels(values: np.ndarray, spec: QuantizationSpec) -> np.ndarray:
    """Quantize an (..., 8) pre-activation array channel by channel."""
    out = np.empty(values.shape, dtype=np.uint8)
    for c, (lo, hi) in enumerate(spec.ranges):
        out[..., c] = quantize(values[..., c], lo, hi)
    return out


def dequantize_channels(codes: np.ndarray, spec: QuantizationSpec) -> np.ndarray:
    out = np.empty(codes.shape, dtype=np.float64)
    for c, (lo, hi) in enumerate(spec.ranges):
        out[..., c] = dequantize(codes[..., c], lo, hi)
    return out


def dequant_tables(spec: QuantizationSpec) -> np.ndarray:
    """(8, 256) lookup table mapping code -> dequantized value per channel."""
    codes = np.arange(256)
    return np.stack([dequantize(codes, lo, hi) for lo, hi in spec.ranges])


def density_activation(x) -> np.ndarray:
    """exp of the density pre-activation, clamped to [0, DENSITY_MAX]."""
    return np.minimum(np.exp(np.minimum(x, np.log(DENSITY_MAX))), DENSITY_MAX)


def color_activation(x) -> np.ndarray:
    """Logistic sigmoid; maps color/feature pre-activations into [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def apply_activations(pre: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an (..., 8) pre-activation array into (sigma, diffuse, feature)."""
    sigma = density_activation(pre[..., 0])
    rest = color_activation(pre[..., 1:])
    return sigma, rest[..., :3], rest[..., 3:]
