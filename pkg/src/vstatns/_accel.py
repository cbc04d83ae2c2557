"""Numba switch.

Set ``VSTATNS_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  When numba
is missing the numpy paths are used automatically.
"""
import os

_disabled = os.environ.get("VSTATNS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

USE_NUMBA = (_numba is not None) and not _disabled
HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator when numba is unavailable."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if _numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)
