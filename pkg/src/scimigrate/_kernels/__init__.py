"""Kernel backend selection.

The compiled extension is used when built; set ``SCIMIGRATE_PURE=1`` to force
the pure-Python fallback (both produce identical output).
"""

import os

from . import _pure
from ._pure import CLASS_OTHER, CLASS_PERMANENT, CLASS_RETURN, CLASS_STAY

if os.environ.get("SCIMIGRATE_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

resolve_trajectories = _impl.resolve_trajectories

__all__ = [
    "BACKEND",
    "CLASS_OTHER",
    "CLASS_PERMANENT",
    "CLASS_RETURN",
    "CLASS_STAY",
    "resolve_trajectories",
]
