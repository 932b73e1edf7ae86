"""Kernel backend selection.

The compiled extension is preferred when present; the numpy fallback in
``pure`` is always importable. Set ANPR_PURE_KERNELS=1 to force the fallback
(used by the parity tests and the benchmark).
"""

import os

from . import pure

if os.environ.get("ANPR_PURE_KERNELS", "") not in ("", "0"):
    _native = None
else:
    try:
        from . import _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None

BACKEND = "native" if _native is not None else "pure"
_impl = _native if _native is not None else pure

bilateral = _impl.bilateral
canny_nms = _impl.canny_nms
hysteresis = _impl.hysteresis
erode_rect = _impl.erode_rect
dilate_rect = _impl.dilate_rect
label = _impl.label
lcs_len = _impl.lcs_len

__all__ = [
    "BACKEND",
    "bilateral",
    "canny_nms",
    "hysteresis",
    "erode_rect",
    "dilate_rect",
    "label",
    "lcs_len",
]
