"""Numba switch.

Set ``MMCOMP_DISABLE_NUMBA=1`` before import to run every hot kernel on its
pure-numpy path. Both paths are always importable so they can be compared.
"""

import os

_flag = os.environ.get("MMCOMP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _flag not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
