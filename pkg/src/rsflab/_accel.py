"""Numba detection and backend selection.

The numba path is used when numba imports cleanly and the environment
variable ``RSFLAB_DISABLE_NUMBA`` is unset (or set to ``0``/empty).  The flag
is read on every dispatch, so tests and benchmarks can flip it at runtime.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "RSFLAB_DISABLE_NUMBA"


def njit(func):
    """``numba.njit(cache=True)`` if numba is importable, else identity."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def use_numba() -> bool:
    if not HAVE_NUMBA:
        return False
    return os.environ.get(ENV_FLAG, "").strip() in ("", "0")


def backend() -> str:
    return "numba" if use_numba() else "numpy"
