"""Numba switch.

Hot loops are compiled with ``numba.njit`` unless ``BUGSYLV_NUMBA`` is set to
``0``/``false``/``off`` (or numba is not importable), in which case the very
same kernel sources run as plain Python on top of numpy vector primitives.
"""
import os

_flag = os.environ.get("BUGSYLV_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _flag not in ("0", "false", "off", "no")


def jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
