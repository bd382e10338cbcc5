"""Intruder-counting kernels.

``group_stats`` is the inner loop of the robustness metric.  A compiled
Cython build is used when available; otherwise a numpy implementation with
the same contract.  Set ``TAXOQUAL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

IMPLEMENTATION = "python"
group_stats = _fallback.group_stats

if os.environ.get("TAXOQUAL_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        group_stats = _kernels.group_stats
        IMPLEMENTATION = "cython"

__all__ = ["group_stats", "IMPLEMENTATION", "available"]


def available() -> dict:
    """Map implementation name -> group_stats callable for every importable build."""
    impls = {"python": _fallback.group_stats}
    try:
        from . import _kernels
    except ImportError:
        return impls
    impls["cython"] = _kernels.group_stats
    return impls
