"""Kernel backend selection.

The compiled extension is preferred; set ``LESIONBENCH_PURE=1`` to force the
pure-Python kernels.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("LESIONBENCH_PURE", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"


def available_backends() -> dict:
    """Name -> kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
