"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba imports cleanly and the environment
variable ``MAMMOSEG_NO_NUMBA`` is unset (or ``0``).  Setting it to ``1``
selects the pure numpy / python backend, which computes the same results
and is what the equivalence tests compare against.
"""
import os

from . import _numpy

BACKEND = "numpy"

if os.environ.get("MAMMOSEG_NO_NUMBA", "0") in ("", "0"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba missing
        _impl = _numpy
else:
    _impl = _numpy

march = _impl.march
label8 = _impl.label8
glcm_counts = _impl.glcm_counts
window_moments = _impl.window_moments
levelset_rate = _impl.levelset_rate

__all__ = [
    "BACKEND",
    "march",
    "label8",
    "glcm_counts",
    "window_moments",
    "levelset_rate",
]
