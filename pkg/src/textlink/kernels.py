"""Backend selection for the geometric hot loops.

The compiled extension is used when it was built; otherwise the pure-Python
kernels are used. Set ``TEXTLINK_PURE_PYTHON=1`` to force the fallback.
"""
import os

from textlink import _pykernels

BACKEND = "python"

if os.environ.get("TEXTLINK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from textlink import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

convex_iou = _impl.convex_iou
greedy_nms = _impl.greedy_nms
open_path_dp = _impl.open_path_dp
clip_convex = _pykernels.clip_convex

__all__ = ["BACKEND", "convex_iou", "greedy_nms", "open_path_dp", "clip_convex"]
