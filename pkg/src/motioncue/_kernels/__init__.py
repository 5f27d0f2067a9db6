"""Kernel backend selection: compiled Cython core if built, NumPy otherwise.

Set MOTIONCUE_FORCE_FALLBACK=1 to skip the compiled core (used by the
benchmark and the parity tests).
"""

import os

from . import _fallback

if os.environ.get("MOTIONCUE_FORCE_FALLBACK"):
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

segment_distance_field = _impl.segment_distance_field
disc_owner_map = _impl.disc_owner_map

__all__ = ["BACKEND", "segment_distance_field", "disc_owner_map"]
