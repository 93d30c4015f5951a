"""Optional numba acceleration.

Hot kernels are written twice: a loop version compiled with ``numba.njit`` and
a vectorised numpy version.  ``HYBRID_PLANNER_NUMBA=0`` forces the numpy path;
the numpy path is also used when numba is not importable.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_FLAG = os.environ.get("HYBRID_PLANNER_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as-is."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def pick(numba_impl, numpy_impl):
    """Select the active implementation of a kernel pair."""
    return numba_impl if USE_NUMBA else numpy_impl
