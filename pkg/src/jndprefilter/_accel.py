"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` loop version and a
vectorized numpy version. The loop version is used when numba imports and
``JNDPREFILTER_NUMBA`` is not set to ``0``/``false``/``off``. Without numba the
loop versions still run (as plain Python), so tests of both paths work anywhere.
"""

import os

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False


def _flag_enabled():
    value = os.environ.get("JNDPREFILTER_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


USE_NUMBA = NUMBA_AVAILABLE and _flag_enabled()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if NUMBA_AVAILABLE:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]

    def _wrap(f):
        return f

    return _wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
