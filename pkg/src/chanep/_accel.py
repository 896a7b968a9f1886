"""numba switch.

Set ``CHANEP_PURE_NUMPY=1`` before import to run every kernel as plain
Python/numpy; the same happens when numba cannot be imported.
"""
import os

PURE_NUMPY = os.environ.get("CHANEP_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes", "on")

HAVE_NUMBA = False
if not PURE_NUMPY:
    try:
        from numba import njit as _njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity otherwise."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


BACKEND = "numba" if HAVE_NUMBA else "numpy"
