"""Selects the compiled RK4 core when built, else the numpy fallback.

Set ``HOLOWAVE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
rk4_steps = _fallback.rk4_steps

if os.environ.get("HOLOWAVE_PURE_PYTHON", "") != "1":
    try:
        from . import _kernels

        rk4_steps = _kernels.rk4_steps
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "rk4_steps"]
