"""Sparse per-instance motion hints lifted to dense pixel-aligned cue fields.

A cue field has four planes on the keyframe pixel grid: in-plane direction
(u, v), out-of-plane depth delta, and mass. At inference time the planes come
from rasterizing user arrows inside instance masks with a Gaussian falloff
from the drawn segment; at training time they come from painting per-instance
mean flow and mean depth change back over the mask.

Conventions, fixed here:
  * falloff alpha(p) = exp(-d(p)^2 / (2 sigma^2)), d = distance from the
    pixel center to the arrow segment; default sigma = min(H, W) / 20
  * pixel centers sit at integer + 0.5 coordinates
  * overlapping masks resolve per pixel to the contribution with the largest
    alpha ("closest arrow wins"); exact ties go to the lowest instance index
  * all planes are exactly zero outside the union of masks; in-plane
    magnitude is at most 1; depth delta stays in [-1, 1]
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateArrow, DimensionMismatch, EmptyMask

CHANNELS = ("u", "v", "dz", "mass")


@dataclass(frozen=True)
class Arrow:
    """User hint: a 2D drag from start to end plus a scalar depth delta."""

    start: tuple[float, float]
    end: tuple[float, float]
    depth_delta: float = 0.0

    @property
    def length(self) -> float:
        dx = self.end[0] - self.start[0]
        dy = self.end[1] - self.start[1]
        return float(np.hypot(dx, dy))

    @property
    def direction(self) -> tuple[float, float]:
        """Unit in-plane direction; (0, 0) for a pure out-of-plane arrow."""
        length = self.length
        if length == 0.0:
            return (0.0, 0.0)
        return ((self.end[0] - self.start[0]) / length, (self.end[1] - self.start[1]) / length)


@dataclass(frozen=True)
class InstanceSpec:
    """One controllable instance: mask, arrow, and normalized mass in (0, 1]."""

    mask: np.ndarray
    arrow: Arrow
    mass: float = 1.0

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise DimensionMismatch(f"mask must be 2D, got shape {mask.shape}")
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")


@dataclass
class CueField:
    """Dense H x W x 4 control field with planes (u, v, dz, mass)."""

    planes: np.ndarray  # (4, H, W) float64

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3 or self.planes.shape[0] != 4:
            raise DimensionMismatch(f"planes must be (4, H, W), got {self.planes.shape}")

    @classmethod
    def zeros(cls, height: int, width: int) -> "CueField":
        return cls(np.zeros((4, height, width)))

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    u = property(lambda self: self.planes[0])
    v = property(lambda self: self.planes[1])
    dz = property(lambda self: self.planes[2])
    mass = property(lambda self: self.planes[3])

    def as_hwc(self) -> np.ndarray:
        """Channel-minor (H, W, 4) view for serialization."""
        return np.ascontiguousarray(self.planes.transpose(1, 2, 0))


def default_sigma(height: int, width: int) -> float:
    return min(height, width) / 20.0


def _require_nonempty(mask: np.ndarray):
    if not mask.any():
        raise EmptyMask("instance mask has no set pixels")


def rasterize_instance(spec: InstanceSpec, sigma: float | None = None):
    """Rasterize one instance into (alpha, contribution planes).

    alpha = exp(-d^2 / (2 sigma^2)) inside the mask, 0 outside; the in-plane
    planes are alpha times the unit arrow direction, the depth and mass
    planes are constant over the mask. A point arrow (start == end) is
    allowed only when it carries a depth delta; its alpha falls off from the
    point and its in-plane planes are zero.
    """
    _require_nonempty(spec.mask)
    if spec.arrow.length == 0.0 and spec.arrow.depth_delta == 0.0:
        raise DegenerateArrow("arrow has zero length and zero depth delta")
    h, w = spec.mask.shape
    if sigma is None:
        sigma = default_sigma(h, w)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")

    (sx, sy), (ex, ey) = spec.arrow.start, spec.arrow.end
    dist = _kernels.segment_distance_field(h, w, float(sx), float(sy), float(ex), float(ey))
    alpha = np.exp(-(dist * dist) / (2.0 * sigma * sigma))
    alpha[~spec.mask] = 0.0

    ux, uy = spec.arrow.direction
    planes = np.zeros((4, h, w))
    planes[0] = alpha * ux
    planes[1] = alpha * uy
    planes[2] = np.where(spec.mask, spec.arrow.depth_delta, 0.0)
    planes[3] = np.where(spec.mask, spec.mass, 0.0)
    return alpha, CueField(planes)


def compose_cue_field(specs: list[InstanceSpec], sigma: float | None = None) -> CueField:
    """Compose instance contributions; per pixel the largest alpha wins.

    Ties on alpha go to the lowest spec index, so the result is independent
    of evaluation order. Pixels outside every mask stay zero.
    """
    if not specs:
        raise ValueError("need at least one instance spec")
    shape = specs[0].mask.shape
    for spec in specs[1:]:
        if spec.mask.shape != shape:
            raise DimensionMismatch(
                f"mask shapes differ: {shape} vs {spec.mask.shape}"
            )
    alphas = []
    fields = []
    for spec in specs:
        alpha, contribution = rasterize_instance(spec, sigma)
        alphas.append(alpha)
        fields.append(contribution.planes)
    alphas = np.stack(alphas)            # (K, H, W)
    fields = np.stack(fields)            # (K, 4, H, W)
    winner = np.argmax(alphas, axis=0)   # first max wins -> lowest index
    rows, cols = np.indices(shape)
    return CueField(fields[winner, :, rows, cols].transpose(2, 0, 1))


def derive_mean_flow(flow: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean of the flow vectors over the mask."""
    flow = np.asarray(flow, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DimensionMismatch(f"flow must be (H, W, 2), got {flow.shape}")
    if flow.shape[:2] != mask.shape:
        raise DimensionMismatch(f"flow {flow.shape[:2]} vs mask {mask.shape}")
    _require_nonempty(mask)
    picked = flow[mask]
    return float(picked[:, 0].mean()), float(picked[:, 1].mean())


def derive_delta_depth(d_t: np.ndarray, d_t1: np.ndarray, mask: np.ndarray) -> float:
    """Mean pointwise depth change over the mask."""
    d_t = np.asarray(d_t, dtype=np.float64)
    d_t1 = np.asarray(d_t1, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if d_t.shape != d_t1.shape or d_t.shape != mask.shape:
        raise DimensionMismatch(
            f"depth/mask shapes differ: {d_t.shape}, {d_t1.shape}, {mask.shape}"
        )
    _require_nonempty(mask)
    return float((d_t1[mask] - d_t[mask]).mean())


def paint_training_cue(
    mean_vec: tuple[float, float],
    delta_z: float,
    mass: float,
    mask: np.ndarray,
    max_speed: float = 1.0,
) -> CueField:
    """Paint constant per-instance values over the mask.

    The in-plane vector is divided by the declared scene-level max_speed and
    then clipped to unit norm; the depth delta is clipped into [-1, 1]. mass
    is painted as given (callers normalize it to (0, 1] scene-wide).
    """
    mask = np.asarray(mask, dtype=bool)
    _require_nonempty(mask)
    if max_speed <= 0:
        raise ValueError(f"max_speed must be positive, got {max_speed}")
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")
    vx, vy = mean_vec[0] / max_speed, mean_vec[1] / max_speed
    norm = float(np.hypot(vx, vy))
    if norm > 1.0:
        vx, vy = vx / norm, vy / norm
    dz = float(np.clip(delta_z, -1.0, 1.0))
    h, w = mask.shape
    planes = np.zeros((4, h, w))
    planes[0][mask] = vx
    planes[1][mask] = vy
    planes[2][mask] = dz
    planes[3][mask] = mass
    return CueField(planes)
