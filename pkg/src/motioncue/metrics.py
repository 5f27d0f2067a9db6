"""physics-iq-lite: four motion-coherence checks aggregated to 0..100.

Motion is read from consecutive-frame absolute differences thresholded at a
fixed fraction of the unit intensity range. The four sub-scores (spatial IoU,
mean per-frame spatiotemporal IoU, magnitude-weighted IoU, and an MSE-derived
similarity) are each in [0, 1] and symmetric in their arguments; the
aggregate is their arithmetic mean times 100. This is a repo-local scoring
convention, not a reimplementation of any published metric; scores are
comparable only within this codebase.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewFrames

# 2% of the unit intensity range
DEFAULT_THRESHOLD = 0.02


@dataclass(frozen=True)
class MotionMask:
    """Thresholded motion evidence for one clip.

    spatiotemporal holds one map per consecutive frame pair, shape
    (F-1, H, W); spatial is their OR; magnitude accumulates the absolute
    differences, shape (H, W).
    """

    spatial: np.ndarray
    spatiotemporal: np.ndarray
    magnitude: np.ndarray


def _frames_of(clip) -> np.ndarray:
    frames = getattr(clip, "frames", clip)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3:
        raise DimensionMismatch(f"clip frames must be (F, H, W), got {frames.shape}")
    return frames


def motion_masks(clip, threshold: float = DEFAULT_THRESHOLD) -> MotionMask:
    """Per-frame-pair motion maps from thresholded absolute differences."""
    frames = _frames_of(clip)
    if frames.shape[0] < 2:
        raise TooFewFrames(f"need >= 2 frames, got {frames.shape[0]}")
    diffs = np.abs(np.diff(frames, axis=0))
    st = diffs > threshold
    return MotionMask(
        spatial=st.any(axis=0),
        spatiotemporal=st,
        magnitude=diffs.sum(axis=0),
    )


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _weighted_iou(mag_a: np.ndarray, mag_b: np.ndarray) -> float:
    denom = np.maximum(mag_a, mag_b).sum()
    if denom == 0.0:
        return 1.0
    return float(np.minimum(mag_a, mag_b).sum() / denom)


def score(gen, ref, threshold: float = DEFAULT_THRESHOLD) -> dict[str, float]:
    """Four sub-scores plus their 0..100 aggregate.

    Empty-vs-empty masks count as perfect agreement (IoU = 1): both clips
    claim nothing moved.
    """
    frames_gen = _frames_of(gen)
    frames_ref = _frames_of(ref)
    if frames_gen.shape != frames_ref.shape:
        raise DimensionMismatch(
            f"clips disagree on shape: {frames_gen.shape} vs {frames_ref.shape}"
        )
    mask_gen = motion_masks(frames_gen, threshold)
    mask_ref = motion_masks(frames_ref, threshold)

    spatial = _iou(mask_gen.spatial, mask_ref.spatial)
    st = float(
        np.mean(
            [
                _iou(a, b)
                for a, b in zip(mask_gen.spatiotemporal, mask_ref.spatiotemporal)
            ]
        )
    )
    weighted = _weighted_iou(mask_gen.magnitude, mask_ref.magnitude)
    mse = float(np.mean((frames_gen - frames_ref) ** 2))
    mse_sim = 1.0 / (1.0 + mse)

    aggregate = 100.0 * (spatial + st + weighted + mse_sim) / 4.0
    return {
        "spatial_iou": spatial,
        "st_iou": st,
        "weighted_iou": weighted,
        "mse_sim": mse_sim,
        "aggregate": aggregate,
    }
