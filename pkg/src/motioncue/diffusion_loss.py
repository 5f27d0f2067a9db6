"""Joint epsilon-prediction objective, toy noising, and a seeded trainer.

The loss is the rgb-head MSE plus lambda_aux times the aux-head MSE against
one shared noise target. The toy loop runs full-batch gradient descent on a
fixed set of noised token sequences built from simulated clips, so the trace
is deterministic for a seed and exactly constant at zero learning rate.
"""

from dataclasses import dataclass, replace

import numpy as np

from .cue_field import (
    derive_delta_depth,
    derive_mean_flow,
    paint_training_cue,
)
from .dense_rope import RopeBank, prepare_motion_tokens
from .errors import BadStep, NonFiniteLoss, ShapeMismatch
from .joint_attention import JointAttentionBlock, TokenSequence, build_sequence
from .rope_math import GridIndex, grid_angles_block
from .sim_data import Ball, Scene, render_clip

ALPHA_BAR_STEPS = 50
CUE_MAX_SPEED = 3.0


def linear_alpha_bar(num_steps: int = ALPHA_BAR_STEPS) -> np.ndarray:
    """Cumulative signal coefficients from 1 (clean) down to 0 (pure noise)."""
    if num_steps < 2:
        raise BadStep(f"schedule needs at least 2 steps, got {num_steps}")
    return np.linspace(1.0, 0.0, num_steps)


@dataclass(frozen=True)
class NoisySample:
    """One forward-noised latent; x_t = sqrt(ab)*x0 + sqrt(1-ab)*eps exactly."""

    x_t: np.ndarray
    eps: np.ndarray
    t: int
    alpha_bar: float


def noise_sample(x0: np.ndarray, t: int, schedule: np.ndarray, seed) -> NoisySample:
    """Draw eps and noise x0 at schedule step t, deterministically in seed."""
    schedule = np.asarray(schedule, dtype=np.float64)
    if not 0 <= t < schedule.shape[0]:
        raise BadStep(f"step {t} outside schedule of length {schedule.shape[0]}")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.random.default_rng(seed).standard_normal(x0.shape)
    ab = float(schedule[t])
    return NoisySample(np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps, eps, t, ab)


def reconstruct_clean(sample: NoisySample) -> np.ndarray:
    """Invert the noising identity; undefined at alpha_bar = 0."""
    if sample.alpha_bar <= 0.0:
        raise BadStep("alpha_bar = 0 carries no signal to reconstruct")
    return (sample.x_t - np.sqrt(1.0 - sample.alpha_bar) * sample.eps) / np.sqrt(
        sample.alpha_bar
    )


def loss_terms(eps_hat_rgb, eps_hat_aux, eps, lambda_aux: float = 1.0):
    """(total, rgb_mse, aux_mse) of the joint objective."""
    eps_hat_rgb = np.asarray(eps_hat_rgb, dtype=np.float64)
    eps_hat_aux = np.asarray(eps_hat_aux, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps_hat_rgb.shape != eps.shape or eps_hat_aux.shape != eps.shape:
        raise ShapeMismatch(
            f"prediction shapes {eps_hat_rgb.shape}/{eps_hat_aux.shape} "
            f"must match noise {eps.shape}"
        )
    if lambda_aux < 0:
        raise ValueError(f"lambda_aux must be >= 0, got {lambda_aux}")
    rgb = float(np.mean((eps_hat_rgb - eps) ** 2))
    aux = float(np.mean((eps_hat_aux - eps) ** 2))
    return rgb + lambda_aux * aux, rgb, aux


def joint_loss(eps_hat_rgb, eps_hat_aux, eps, lambda_aux: float = 1.0) -> float:
    return loss_terms(eps_hat_rgb, eps_hat_aux, eps, lambda_aux)[0]


# -- clips to token sequences ----------------------------------------------


def flatten_patches(image: np.ndarray, patch: int) -> np.ndarray:
    """(H, W) -> (n, patch*patch) row-major tokens of raw pixels."""
    h, w = image.shape
    if h % patch or w % patch:
        raise ShapeMismatch(f"image {h}x{w} not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    return (
        image.reshape(gh, patch, gw, patch)
        .transpose(0, 2, 1, 3)
        .reshape(gh * gw, patch * patch)
    )


def _frame_grid_angles(frames: int, gh: int, gw: int, d: int) -> np.ndarray:
    indices = [
        GridIndex(t, i, j)
        for t in range(frames)
        for i in range(gh)
        for j in range(gw)
    ]
    return grid_angles_block(indices, d)


def clip_to_training_item(
    clip,
    *,
    d: int = 16,
    patch: int = 4,
    budget: int = 4,
    seed: int = 0,
    flow_proj: np.ndarray,
    text: np.ndarray,
    mode: str = "tile",
) -> TokenSequence:
    """Two clip frames to a clean [text; rgb; aux; motion] sequence.

    rgb tokens are flattened pixel patches of the first two frames, aux
    tokens the same for depth, both scaled to [-1, 1]; the cue field is
    painted from per-ball derived motion and lifted to motion tokens with
    first-frame site codes.
    """
    if clip.num_frames < 2:
        raise ShapeMismatch("need at least two frames")
    h, w = clip.frames.shape[1:]
    gh, gw = h // patch, w // patch
    if patch * patch != d:
        raise ShapeMismatch(f"patch {patch}x{patch} tokens must match width {d}")

    rgb = np.concatenate(
        [flatten_patches(2.0 * clip.frames[t] - 1.0, patch) for t in (0, 1)]
    )
    aux = np.concatenate(
        [flatten_patches(2.0 * clip.depth[t] - 1.0, patch) for t in (0, 1)]
    )
    rgb_angles = _frame_grid_angles(2, gh, gw, d)

    planes = np.zeros((4, h, w))
    for k in range(clip.masks.shape[1]):
        mask0 = clip.masks[0, k]
        if not mask0.any():
            continue
        mean = derive_mean_flow(clip.flow[0], mask0)
        overlap = mask0 & clip.masks[1, k]
        dz = derive_delta_depth(clip.depth[0], clip.depth[1], overlap) if overlap.any() else 0.0
        field = paint_training_cue(
            mean, dz, clip.states[0][k].mass, mask0, max_speed=CUE_MAX_SPEED
        )
        planes += field.planes

    union = clip.masks[0].any(axis=0)
    site_mask = union.reshape(gh, patch, gw, patch).any(axis=(1, 3))
    site_angles = _frame_grid_angles(1, gh, gw, d)
    bank = RopeBank.from_angles(site_angles)
    batch, _, indices = prepare_motion_tokens(
        site_mask[None], planes[None], budget, bank, seed, proj=flow_proj, mode=mode
    )
    motion_angles = site_angles[indices[0]]
    return build_sequence(text, rgb, aux, batch.tokens[0], rgb_angles, motion_angles)


def make_training_set(
    count: int = 16,
    seed: int = 0,
    *,
    d: int = 16,
    patch: int = 4,
    budget: int = 4,
    size: int = 16,
    mode: str = "tile",
) -> list[TokenSequence]:
    """Fixed synthetic dataset of single-ball clips as token sequences."""
    master = np.random.SeedSequence(seed)
    shared = np.random.default_rng(master.spawn(1)[0])
    flow_proj = shared.normal(scale=0.5, size=(d, 4))
    text = shared.normal(scale=0.5, size=(2, d))

    items = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        radius = 3.0
        cx = float(rng.uniform(radius + 2.0, size - radius - 2.0))
        cy = float(rng.uniform(radius + 2.0, size - radius - 2.0))
        angle = float(rng.uniform(0.0, 2.0 * np.pi))
        speed = 1.5
        ball = Ball(
            center=(cx, cy),
            velocity=(speed * np.cos(angle), speed * np.sin(angle)),
            radius=radius,
            mass=float(rng.uniform(0.5, 2.0)),
            z=float(rng.uniform(0.3, 0.7)),
            vz=float(rng.uniform(-0.02, 0.02)),
        )
        scene = Scene(width=size, height=size, balls=(ball,), seed=i)
        clip = render_clip(scene, frames=2)
        items.append(
            clip_to_training_item(
                clip, d=d, patch=patch, budget=budget, seed=seed + i,
                flow_proj=flow_proj, text=text, mode=mode,
            )
        )
    return items


# -- model -------------------------------------------------------------------


class JointDenoiser:
    """Attention block plus per-stream linear noise heads.

    The block output is added back to the noisy tokens (residual) before the
    heads; text and motion rows of the block output are discarded.
    """

    def __init__(self, d: int = 16, heads: int = 2, seed: int = 0):
        self.block = JointAttentionBlock(d, heads=heads, seed=seed)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
        scale = 1.0 / np.sqrt(d)
        self.heads = {
            "head_rgb": rng.normal(scale=scale, size=(d, d)),
            "head_aux": rng.normal(scale=scale, size=(d, d)),
        }

    def parameters(self) -> dict[str, np.ndarray]:
        merged = dict(self.block.params)
        merged.update(self.heads)
        return merged

    def forward(self, seq: TokenSequence):
        block_out, cache = self.block.forward(seq)
        sl = seq.slices()
        res_rgb = seq.rgb + block_out[sl["rgb"]]
        res_aux = seq.aux + block_out[sl["aux"]]
        pred_rgb = res_rgb @ self.heads["head_rgb"].T
        pred_aux = res_aux @ self.heads["head_aux"].T
        full = {
            "block": cache,
            "seq": seq,
            "res_rgb": res_rgb,
            "res_aux": res_aux,
        }
        return pred_rgb, pred_aux, full

    def backward(self, cache, d_pred_rgb, d_pred_aux) -> dict[str, np.ndarray]:
        seq: TokenSequence = cache["seq"]
        sl = seq.slices()
        grads = {
            "head_rgb": d_pred_rgb.T @ cache["res_rgb"],
            "head_aux": d_pred_aux.T @ cache["res_aux"],
        }
        d_block_out = np.zeros((seq.total(), self.block.d))
        d_block_out[sl["rgb"]] = d_pred_rgb @ self.heads["head_rgb"]
        d_block_out[sl["aux"]] = d_pred_aux @ self.heads["head_aux"]
        block_grads, _ = self.block.backward(cache["block"], d_block_out)
        grads.update(block_grads)
        return grads

    def apply_gradients(self, grads: dict[str, np.ndarray], lr: float):
        for name, g in grads.items():
            if name in self.heads:
                self.heads[name] -= lr * g
            else:
                self.block.params[name] -= lr * g


# -- trainer -----------------------------------------------------------------


@dataclass(frozen=True)
class NoisyItem:
    seq: TokenSequence
    eps: np.ndarray
    t: int


@dataclass
class TrainResult:
    trace: np.ndarray  # (steps, 4): step, rgb_loss, aux_loss, total
    model: "JointDenoiser"

    @property
    def initial_total(self) -> float:
        return float(self.trace[0, 3])

    @property
    def final_total(self) -> float:
        return float(self.trace[-1, 3])


def make_noisy_batch(items, schedule, seed: int) -> list[NoisyItem]:
    """Fixed noised batch: stratified timesteps, one shared eps per item."""
    schedule = np.asarray(schedule, dtype=np.float64)
    count = len(items)
    out = []
    for i, seq in enumerate(items):
        t = int(round(i * (schedule.shape[0] - 1) / max(count - 1, 1)))
        sample = noise_sample(
            seq.rgb, t, schedule, np.random.SeedSequence(seed, spawn_key=(i, 1))
        )
        ab = sample.alpha_bar
        noisy_aux = np.sqrt(ab) * seq.aux + np.sqrt(1.0 - ab) * sample.eps
        out.append(
            NoisyItem(replace(seq, rgb=sample.x_t, aux=noisy_aux), sample.eps, t)
        )
    return out


def train_toy(
    model: JointDenoiser,
    data: list[TokenSequence],
    steps: int = 200,
    seed: int = 0,
    lr: float = 0.05,
    lambda_aux: float = 1.0,
    schedule: np.ndarray | None = None,
) -> TrainResult:
    """Full-batch gradient descent on a fixed noised batch.

    trace[i] holds the batch-mean losses measured before update i, so row 0
    is the untrained loss and a zero learning rate freezes the trace.
    """
    if steps < 1:
        raise BadStep(f"steps must be >= 1, got {steps}")
    if schedule is None:
        schedule = linear_alpha_bar()
    batch = make_noisy_batch(data, schedule, seed)
    count = len(batch)
    trace = np.zeros((steps, 4))
    for step in range(steps):
        rgb_sum = 0.0
        aux_sum = 0.0
        acc: dict[str, np.ndarray] = {}
        for item in batch:
            pred_rgb, pred_aux, cache = model.forward(item.seq)
            _, rgb, aux = loss_terms(pred_rgb, pred_aux, item.eps, lambda_aux)
            rgb_sum += rgb
            aux_sum += aux
            d_rgb = 2.0 * (pred_rgb - item.eps) / (pred_rgb.size * count)
            d_aux = lambda_aux * 2.0 * (pred_aux - item.eps) / (pred_aux.size * count)
            for name, g in model.backward(cache, d_rgb, d_aux).items():
                if name in acc:
                    acc[name] = acc[name] + g
                else:
                    acc[name] = np.array(g, dtype=np.float64)
        rgb_mean = rgb_sum / count
        aux_mean = aux_sum / count
        total = rgb_mean + lambda_aux * aux_mean
        if not np.isfinite(total):
            raise NonFiniteLoss(f"loss diverged at step {step}: {total}")
        trace[step] = (step, rgb_mean, aux_mean, total)
        model.apply_gradients(acc, lr)
    return TrainResult(trace=trace, model=model)


def trace_to_csv(trace: np.ndarray) -> str:
    lines = ["step,rgb_loss,aux_loss,total"]
    for row in trace:
        lines.append(f"{int(row[0])},{row[1]:.10f},{row[2]:.10f},{row[3]:.10f}")
    return "\n".join(lines) + "\n"
