"""Budgeted motion-token preparation with spatially addressed rotary codes.

A binary token mask marks the control sites on the latent grid. A fixed
budget of N sites is selected per batch item (uniform subsample when there
are more than N, cyclic tiling otherwise), their first-frame rotary rows are
gathered from the image part of the positional bank and appended in place of
it, and the gathered cue features are projected to model width.

Sampling is reproducible: the generator is PCG64 seeded through
numpy.random.SeedSequence, with per-item streams derived via
SeedSequence(seed, spawn_key=(item,)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import BankTooSmall, EmptyActiveSet, ShapeMismatch
from .rope_math import rotate_pairs


@dataclass(frozen=True)
class RopeBank:
    """Paired cosine/sine tables, one row per token position."""

    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        if self.cos.shape != self.sin.shape or self.cos.ndim != 2:
            raise ShapeMismatch(
                f"cos/sin must be matching 2D tables, got {self.cos.shape} and {self.sin.shape}"
            )

    @classmethod
    def from_angles(cls, angles: np.ndarray) -> "RopeBank":
        angles = np.asarray(angles, dtype=np.float64)
        return cls(np.cos(angles), np.sin(angles))

    @property
    def rows(self) -> int:
        return self.cos.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.cos.shape[1]


@dataclass(frozen=True)
class ActiveIndexSet:
    """Sorted positions of the 1-entries of a token mask of length n."""

    indices: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class SampledIndices:
    """Budgeted index list drawn from an active set; always length N."""

    indices: np.ndarray
    source: ActiveIndexSet


@dataclass(frozen=True)
class MotionTokenBatch:
    """Projected motion-token embeddings with their sampled grid sites."""

    tokens: np.ndarray   # B x N x d
    indices: np.ndarray  # B x N
    gain: float = 1.0


def collect_active(mask_tokens: np.ndarray) -> ActiveIndexSet:
    """Sorted indices of the nonzero entries of a flat token mask."""
    mask_tokens = np.asarray(mask_tokens).ravel()
    return ActiveIndexSet(np.flatnonzero(mask_tokens != 0), mask_tokens.shape[0])


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def item_seed_sequence(seed: int, item: int) -> np.random.SeedSequence:
    """Independent per-batch-item sampling stream."""
    return np.random.SeedSequence(seed, spawn_key=(item,))


def sample_budget(omega: ActiveIndexSet, budget: int, seed, mode: str = "tile") -> SampledIndices:
    """Fill the token budget from an active set.

    m > budget: uniform subsample without replacement, returned sorted.
    m <= budget, mode "tile": cyclic repetition of the sorted set, truncated
    (deterministic, seed unused). mode "replace": seeded sample with
    replacement, returned sorted.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if mode not in ("tile", "replace"):
        raise ValueError(f"mode must be 'tile' or 'replace', got {mode!r}")
    if omega.m == 0:
        raise EmptyActiveSet("no active control sites to sample from")
    if omega.m > budget:
        picked = np.sort(_generator(seed).choice(omega.indices, size=budget, replace=False))
    elif mode == "tile":
        reps = -(-budget // omega.m)
        picked = np.tile(omega.indices, reps)[:budget]
    else:
        picked = np.sort(_generator(seed).choice(omega.indices, size=budget, replace=True))
    return SampledIndices(picked.astype(np.int64), omega)


def split_and_gather(bank: RopeBank, n: int, sampled: SampledIndices) -> tuple[RopeBank, RopeBank]:
    """Split off the trailing n image rows and gather them at sampled sites."""
    if bank.rows < n:
        raise BankTooSmall(f"bank has {bank.rows} rows, image stream needs {n}")
    base = RopeBank(bank.cos[: bank.rows - n], bank.sin[: bank.rows - n])
    img_cos = bank.cos[bank.rows - n:]
    img_sin = bank.sin[bank.rows - n:]
    idx = sampled.indices
    return base, RopeBank(img_cos[idx], img_sin[idx])


def concat_banks(base: RopeBank, tail: RopeBank) -> RopeBank:
    return RopeBank(
        np.concatenate([base.cos, tail.cos], axis=0),
        np.concatenate([base.sin, tail.sin], axis=0),
    )


def patchify(features: np.ndarray, patch: int) -> np.ndarray:
    """Non-overlapping patch x patch mean pooling, then channel flattening.

    (B, C, H, W) -> (B, n, C) with n = (H/patch) * (W/patch), row-major.
    """
    b, c, h, w = features.shape
    if h % patch or w % patch:
        raise ShapeMismatch(f"feature grid {h}x{w} not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    blocks = features.reshape(b, c, gh, patch, gw, patch).transpose(0, 2, 4, 1, 3, 5)
    # reduce over a flat row-major pixel axis so the arithmetic matches a
    # naive per-patch mean exactly
    return blocks.reshape(b, gh * gw, c, patch * patch).mean(axis=-1)


def prepare_motion_tokens(
    mask: np.ndarray,
    features: np.ndarray,
    budget: int,
    bank: RopeBank,
    seed: int,
    proj: np.ndarray | None = None,
    mode: str = "tile",
) -> tuple[MotionTokenBatch, list[RopeBank], np.ndarray]:
    """Full token-preparation flow for a batch.

    mask: (B, h, w) binary grid on the token lattice; features: (B, C, H, W)
    cue planes with H = h * patch. Returns the projected motion tokens, one
    updated bank per item (base rows unchanged, image rows replaced by the
    gathered sampled rows), and the (B, N) sampled indices.
    """
    mask = np.asarray(mask)
    features = np.asarray(features, dtype=np.float64)
    if mask.ndim != 3 or features.ndim != 4:
        raise ShapeMismatch("mask must be (B, h, w) and features (B, C, H, W)")
    b, h, w = mask.shape
    if features.shape[0] != b:
        raise ShapeMismatch("mask and features disagree on batch size")
    if features.shape[2] % h or features.shape[3] % w:
        raise ShapeMismatch("feature grid is not a multiple of the token grid")
    patch = features.shape[2] // h
    if features.shape[3] // w != patch:
        raise ShapeMismatch("token grid implies unequal patch sizes per axis")

    flat_mask = mask.reshape(b, h * w)
    tokens_per_item = patchify(features, patch)
    n = h * w
    if tokens_per_item.shape[1] != n:
        raise ShapeMismatch("patchified token length disagrees with mask length")

    cdim = tokens_per_item.shape[2]
    if proj is None:
        proj = np.eye(cdim)
    proj = np.asarray(proj, dtype=np.float64)
    if proj.shape[1] != cdim:
        raise ShapeMismatch(f"projection expects {proj.shape[1]} channels, features have {cdim}")

    all_tokens = []
    all_indices = []
    banks = []
    for item in range(b):
        omega = collect_active(flat_mask[item])
        sampled = sample_budget(omega, budget, item_seed_sequence(seed, item), mode=mode)
        base, gathered = split_and_gather(bank, n, sampled)
        banks.append(concat_banks(base, gathered))
        all_tokens.append(tokens_per_item[item][sampled.indices] @ proj.T)
        all_indices.append(sampled.indices)

    batch = MotionTokenBatch(np.stack(all_tokens), np.stack(all_indices))
    return batch, banks, batch.indices


def project_cue_qk(
    token: np.ndarray,
    positional_code,
    gain: float,
    w_q: np.ndarray,
    w_k: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Rotary-tagged query and gain-scaled key for one motion token.

    The code is the token's first-frame site code and is applied after
    projection, as for visual tokens; the gain scales keys only.
    """
    q = rotate_pairs(w_q @ token, positional_code.cos, positional_code.sin)
    k = rotate_pairs(w_k @ token, positional_code.cos, positional_code.sin)
    return q, gain * k
