"""Numba toggle.

Set ``QUASILEVEL_PURE_NUMPY=1`` before import to run every kernel through its
pure-python / numpy path instead of the ``@njit`` compiled one.
"""
import os

PURE_NUMPY = os.environ.get("QUASILEVEL_PURE_NUMPY", "0").lower() in ("1", "true", "yes")

try:
    if PURE_NUMPY:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func


def backend():
    return "numba" if HAS_NUMBA else "numpy"
