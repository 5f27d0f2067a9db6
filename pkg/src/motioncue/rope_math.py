"""Positional-code primitives: sinusoidal absolute codes and rotary rotation.

Rotary codes rotate consecutive channel pairs (x[2j], x[2j+1]) by
position-dependent angles, so attention scores between rotated queries and
keys depend only on index differences. Video tokens get a 3D (t, h, w) index;
the channel pairs are split 2:1:1 across the three axes, each axis on its own
base-10000 frequency ladder.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import IndivisibleSplit, OddWidth

FREQ_BASE = 10000.0

# share of angle pairs given to the (t, h, w) axes; d must be divisible by
# 2 * sum(AXIS_PAIR_SPLIT) = 8
AXIS_PAIR_SPLIT = (2, 1, 1)


class GridIndex(NamedTuple):
    """Spatio-temporal token position on the (frame, row, column) grid."""

    t: int
    h: int
    w: int


@dataclass(frozen=True)
class RotaryCode:
    """Per-pair rotation angles with their cached cosines and sines."""

    angles: np.ndarray
    cos: np.ndarray = field(init=False, repr=False)
    sin: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "cos", np.cos(angles))
        object.__setattr__(self, "sin", np.sin(angles))


def ladder(num_pairs: int) -> np.ndarray:
    """Geometric frequency ladder: 1 / FREQ_BASE**(j / num_pairs)."""
    j = np.arange(num_pairs, dtype=np.float64)
    return FREQ_BASE ** (-j / num_pairs)


def absolute_pe(m: float, d: int) -> np.ndarray:
    """Interleaved (sin, cos) sinusoidal code for scalar position m."""
    if d % 2 != 0:
        raise OddWidth(f"code width must be even, got {d}")
    theta = m * ladder(d // 2)
    out = np.empty(d, dtype=np.float64)
    out[0::2] = np.sin(theta)
    out[1::2] = np.cos(theta)
    return out


def rope_rotate(x: np.ndarray, code: RotaryCode) -> np.ndarray:
    """Rotate each channel pair (x[2j], x[2j+1]) by code.angles[j]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2 != 0:
        raise OddWidth(f"vector width must be even, got {x.shape[-1]}")
    return rotate_pairs(x, code.cos, code.sin)


def rotate_pairs(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    """Pairwise 2D rotation of the last axis; cos/sin broadcast over rows."""
    even = x[..., 0::2]
    odd = x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def axis_pair_counts(d: int) -> tuple[int, int, int]:
    """Number of angle pairs assigned to each of (t, h, w) for width d."""
    unit = 2 * sum(AXIS_PAIR_SPLIT)
    if d % unit != 0:
        raise IndivisibleSplit(
            f"width {d} not divisible by {unit} (pair split {AXIS_PAIR_SPLIT})"
        )
    scale = d // unit
    return tuple(s * scale for s in AXIS_PAIR_SPLIT)


def grid_to_angles(idx: GridIndex, d: int) -> RotaryCode:
    """Rotary code for a 3D grid position, axes on separate ladders."""
    counts = axis_pair_counts(d)
    parts = [
        index * ladder(count)
        for index, count in zip((idx.t, idx.h, idx.w), counts)
    ]
    return RotaryCode(np.concatenate(parts))


def grid_angles_block(indices: list[GridIndex], d: int) -> np.ndarray:
    """Stacked angle rows for a list of grid positions, shape (n, d/2)."""
    if not indices:
        return np.zeros((0, d // 2), dtype=np.float64)
    return np.stack([grid_to_angles(i, d).angles for i in indices])
