"""motioncue: pixel-aligned motion control cues for a toy video model.

Subpackages cover the full loop: sparse hints -> dense 2.5D cue fields
(cue_field), budgeted motion tokens with rotary spatial tags (dense_rope,
rope_math), a dual-stream attention block with analytic gradients
(joint_attention), a joint denoising objective and toy trainer
(diffusion_loss), a deterministic rigid-disc simulator (sim_data), and a
motion-coherence score (metrics).
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
