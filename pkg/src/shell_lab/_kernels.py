"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; setting
``SHELL_LAB_PURE=1`` forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("SHELL_LAB_PURE"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback
else:
    _impl = _fallback

bessel_table = _impl.bessel_table
em_advance = _impl.em_advance

__all__ = ["BACKEND", "bessel_table", "em_advance"]
