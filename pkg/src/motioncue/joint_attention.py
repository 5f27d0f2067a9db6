"""Dual-stream attention block over [text; rgb; aux; motion] tokens.

One full self-attention layer at toy scale, in plain NumPy with an exact
analytic backward pass (verified against finite differences in the tests).

Stream rules:
  * text tokens carry no positional code (equivalently, a zero rotation);
  * rgb and aux tokens at the same spatio-temporal index share one rotary
    code; aux tokens additionally receive a learnable zero-initialized
    domain vector before projection and use their own projection matrices,
    initialized as copies of the shared ones;
  * motion tokens are tagged with their first-frame site codes and their
    keys are scaled by a learnable gain; they expose values to attention,
    but their own outputs are not decoded downstream.

Rotary codes are applied to queries and keys after projection; values are
never rotated. Softmax rows are stabilized by max subtraction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ShapeMismatch
from .rope_math import rotate_pairs

STREAMS = ("text", "rgb", "aux", "motion")


@dataclass
class TokenSequence:
    """Fixed-layout token streams with their rotary angle rows.

    rgb and aux share rgb_angles by construction; motion_angles are the
    first-frame site codes, one row per motion token.
    """

    text: np.ndarray
    rgb: np.ndarray
    aux: np.ndarray
    motion: np.ndarray
    rgb_angles: np.ndarray
    motion_angles: np.ndarray

    def lengths(self) -> tuple[int, int, int, int]:
        return (
            self.text.shape[0],
            self.rgb.shape[0],
            self.aux.shape[0],
            self.motion.shape[0],
        )

    def total(self) -> int:
        return sum(self.lengths())

    def slices(self) -> dict[str, slice]:
        t, l, _, n = self.lengths()
        return {
            "text": slice(0, t),
            "rgb": slice(t, t + l),
            "aux": slice(t + l, t + 2 * l),
            "motion": slice(t + 2 * l, t + 2 * l + n),
        }

    def stream_tags(self) -> list[str]:
        tags = []
        for name, count in zip(STREAMS, self.lengths()):
            tags.extend([name] * count)
        return tags


def build_sequence(text, rgb, aux, motion_tokens, rgb_angles, motion_angles) -> TokenSequence:
    """Assemble and validate the [text; rgb; aux; motion] layout."""
    text, rgb, aux = (np.asarray(a, dtype=np.float64) for a in (text, rgb, aux))
    motion_tokens = np.asarray(motion_tokens, dtype=np.float64)
    rgb_angles = np.asarray(rgb_angles, dtype=np.float64)
    motion_angles = np.asarray(motion_angles, dtype=np.float64)
    if rgb.shape != aux.shape:
        raise LengthMismatch(f"rgb {rgb.shape} and aux {aux.shape} must match")
    if rgb_angles.shape[0] != rgb.shape[0]:
        raise LengthMismatch("rgb_angles must cover every rgb/aux token")
    if motion_angles.shape[0] != motion_tokens.shape[0]:
        raise LengthMismatch("motion_angles must cover every motion token")
    d = rgb.shape[1]
    for name, arr in (("text", text), ("motion", motion_tokens)):
        if arr.shape[1] != d:
            raise ShapeMismatch(f"{name} width {arr.shape[1]} != {d}")
    if rgb_angles.shape[1] != d // 2 or motion_angles.shape[1] != d // 2:
        raise ShapeMismatch("angle rows must have d/2 entries")
    return TokenSequence(text, rgb, aux, motion_tokens, rgb_angles, motion_angles)


class JointAttentionBlock:
    """Single attention block; parameters live in a flat dict of arrays.

    Shared path (text/rgb/motion): w_q, w_k, w_v. Aux path: wa_q, wa_k,
    wa_v, initialized as copies so that a zero domain vector makes the two
    streams exactly equivalent at init. w_o mixes head outputs; g_k scales
    motion keys; d_aux tags aux tokens.
    """

    def __init__(self, d: int, heads: int = 1, seed: int = 0, init_scale: float | None = None):
        if d % heads != 0 or (d // heads) % 2 != 0:
            raise ShapeMismatch(f"width {d} must split into even-sized heads, got {heads}")
        self.d = d
        self.heads = heads
        rng = np.random.default_rng(seed)
        scale = (1.0 / np.sqrt(d)) if init_scale is None else init_scale
        w_q, w_k, w_v, w_o = (rng.normal(scale=scale, size=(d, d)) for _ in range(4))
        self.params = {
            "w_q": w_q,
            "w_k": w_k,
            "w_v": w_v,
            "wa_q": w_q.copy(),
            "wa_k": w_k.copy(),
            "wa_v": w_v.copy(),
            "w_o": w_o,
            "d_aux": np.zeros(d),
            "g_k": np.array(1.0),
        }

    # -- forward -----------------------------------------------------------

    def forward(self, seq: TokenSequence):
        """Full self-attention over the concatenated sequence.

        Returns (outputs, cache); outputs cover all tokens, but motion rows
        are not meant to feed later layers.
        """
        p = self.params
        cos_r, sin_r = np.cos(seq.rgb_angles), np.sin(seq.rgb_angles)
        cos_m, sin_m = np.cos(seq.motion_angles), np.sin(seq.motion_angles)
        aux_eff = seq.aux + p["d_aux"]

        q_parts = {
            "text": seq.text @ p["w_q"].T,
            "rgb": rotate_pairs(seq.rgb @ p["w_q"].T, cos_r, sin_r),
            "aux": rotate_pairs(aux_eff @ p["wa_q"].T, cos_r, sin_r),
            "motion": rotate_pairs(seq.motion @ p["w_q"].T, cos_m, sin_m),
        }
        k_motion_raw = rotate_pairs(seq.motion @ p["w_k"].T, cos_m, sin_m)
        k_parts = {
            "text": seq.text @ p["w_k"].T,
            "rgb": rotate_pairs(seq.rgb @ p["w_k"].T, cos_r, sin_r),
            "aux": rotate_pairs(aux_eff @ p["wa_k"].T, cos_r, sin_r),
            "motion": p["g_k"] * k_motion_raw,
        }
        v_parts = {
            "text": seq.text @ p["w_v"].T,
            "rgb": seq.rgb @ p["w_v"].T,
            "aux": aux_eff @ p["wa_v"].T,
            "motion": seq.motion @ p["w_v"].T,
        }

        q = np.concatenate([q_parts[s] for s in STREAMS])
        k = np.concatenate([k_parts[s] for s in STREAMS])
        v = np.concatenate([v_parts[s] for s in STREAMS])

        n = q.shape[0]
        dh = self.d // self.heads
        qh = q.reshape(n, self.heads, dh)
        kh = k.reshape(n, self.heads, dh)
        vh = v.reshape(n, self.heads, dh)
        scores = np.einsum("ihd,jhd->hij", qh, kh) / np.sqrt(dh)
        shifted = scores - scores.max(axis=2, keepdims=True)
        expd = np.exp(shifted)
        attn = expd / expd.sum(axis=2, keepdims=True)
        mixed = np.einsum("hij,jhd->ihd", attn, vh).reshape(n, self.d)
        out = mixed @ p["w_o"].T

        cache = {
            "seq": seq,
            "aux_eff": aux_eff,
            "cos_r": cos_r, "sin_r": sin_r,
            "cos_m": cos_m, "sin_m": sin_m,
            "k_motion_raw": k_motion_raw,
            "q": q, "k": k, "v": v,
            "attn": attn, "mixed": mixed,
        }
        return out, cache

    # -- backward ----------------------------------------------------------

    def backward(self, cache, d_out):
        """Exact gradients of forward; returns (param grads, input grads)."""
        p = self.params
        seq: TokenSequence = cache["seq"]
        attn, mixed = cache["attn"], cache["mixed"]
        n = cache["q"].shape[0]
        dh = self.d // self.heads
        sl = seq.slices()

        d_mixed = d_out @ p["w_o"]
        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        grads["w_o"] = d_out.T @ mixed

        d_mixed_h = d_mixed.reshape(n, self.heads, dh)
        vh = cache["v"].reshape(n, self.heads, dh)
        qh = cache["q"].reshape(n, self.heads, dh)
        kh = cache["k"].reshape(n, self.heads, dh)
        d_attn = np.einsum("ihd,jhd->hij", d_mixed_h, vh)
        dv = np.einsum("hij,ihd->jhd", attn, d_mixed_h).reshape(n, self.d)
        d_scores = attn * (d_attn - (d_attn * attn).sum(axis=2, keepdims=True))
        dq = (np.einsum("hij,jhd->ihd", d_scores, kh) / np.sqrt(dh)).reshape(n, self.d)
        dk = (np.einsum("hij,ihd->jhd", d_scores, qh) / np.sqrt(dh)).reshape(n, self.d)

        cos_r, sin_r = cache["cos_r"], cache["sin_r"]
        cos_m, sin_m = cache["cos_m"], cache["sin_m"]
        aux_eff = cache["aux_eff"]
        inputs = {}

        # text: plain projections
        s = sl["text"]
        grads["w_q"] += dq[s].T @ seq.text
        grads["w_k"] += dk[s].T @ seq.text
        grads["w_v"] += dv[s].T @ seq.text
        inputs["text"] = dq[s] @ p["w_q"] + dk[s] @ p["w_k"] + dv[s] @ p["w_v"]

        # rgb: rotation is orthogonal, so its adjoint rotates by -angles
        s = sl["rgb"]
        dpq = rotate_pairs(dq[s], cos_r, -sin_r)
        dpk = rotate_pairs(dk[s], cos_r, -sin_r)
        grads["w_q"] += dpq.T @ seq.rgb
        grads["w_k"] += dpk.T @ seq.rgb
        grads["w_v"] += dv[s].T @ seq.rgb
        inputs["rgb"] = dpq @ p["w_q"] + dpk @ p["w_k"] + dv[s] @ p["w_v"]

        # aux: own projections acting on (x + d_aux)
        s = sl["aux"]
        dpq = rotate_pairs(dq[s], cos_r, -sin_r)
        dpk = rotate_pairs(dk[s], cos_r, -sin_r)
        grads["wa_q"] += dpq.T @ aux_eff
        grads["wa_k"] += dpk.T @ aux_eff
        grads["wa_v"] += dv[s].T @ aux_eff
        d_aux_eff = dpq @ p["wa_q"] + dpk @ p["wa_k"] + dv[s] @ p["wa_v"]
        grads["d_aux"] += d_aux_eff.sum(axis=0)
        inputs["aux"] = d_aux_eff

        # motion: gained keys, first-frame rotation
        s = sl["motion"]
        dpq = rotate_pairs(dq[s], cos_m, -sin_m)
        grads["g_k"] += np.sum(dk[s] * cache["k_motion_raw"])
        dk_raw = p["g_k"] * dk[s]
        dpk = rotate_pairs(dk_raw, cos_m, -sin_m)
        grads["w_q"] += dpq.T @ seq.motion
        grads["w_k"] += dpk.T @ seq.motion
        grads["w_v"] += dv[s].T @ seq.motion
        inputs["motion"] = dpq @ p["w_q"] + dpk @ p["w_k"] + dv[s] @ p["w_v"]

        return grads, inputs


def attention_forward(seq: TokenSequence, block: JointAttentionBlock):
    """Functional wrapper: outputs only (use block.forward for the cache)."""
    out, _ = block.forward(seq)
    return out


def attention_backward(block: JointAttentionBlock, cache, upstream):
    return block.backward(cache, upstream)
