"""Numba switch for the numeric kernels.

Set ``HYPOPROP_DISABLE_NUMBA=1`` before importing the package to force the
pure-numpy/pure-Python paths. Kernels written as plain loops are compiled with
``njit`` when numba is importable and run interpreted otherwise.
"""

import os

DISABLED = os.environ.get("HYPOPROP_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if DISABLED:
        raise ImportError("numba disabled by HYPOPROP_DISABLE_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def jit(func):
    """Compile ``func`` with numba when enabled, else return it untouched."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func
