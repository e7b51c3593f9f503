"""Optional numba acceleration.

Set ``WHSYN_DISABLE_NUMBA=1`` to run every kernel as plain numpy/Python.
The flag is read once at import time.
"""
import os

_FLAG = os.environ.get("WHSYN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not _FLAG


def jit(fn):
    """``numba.njit(cache=True)`` when enabled, else ``fn`` unchanged."""
    if not USE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)
