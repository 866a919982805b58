"""Numba toggle.

Set ``CMZDRIL_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
cannot be imported the numpy path is used silently.
"""

import os

ENV_FLAG = "CMZDRIL_DISABLE_NUMBA"

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAS_NUMBA = False


def _flag_set(value):
    return value.strip().lower() not in ("", "0", "false", "no", "off")


USE_NUMBA = HAS_NUMBA and not _flag_set(os.environ.get(ENV_FLAG, ""))


def njit(func):
    """Compile ``func`` in nopython mode. Raises if numba is unavailable."""
    if not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    return _njit(cache=True, nogil=True)(func)


def select(loop_impl, numpy_impl):
    """Return the jitted loop kernel when numba is active, else the numpy one."""
    if USE_NUMBA:
        return njit(loop_impl)
    return numpy_impl
