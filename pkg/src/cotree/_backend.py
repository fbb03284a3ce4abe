"""Kernel backend selection.

Hot kernels are plain Python functions over numpy arrays, compiled with
numba's nopython mode at import time.  Setting ``COTREE_JIT=0`` in the
environment skips compilation and runs the same functions as ordinary
Python, which is orders of magnitude slower but has no dependency on a
working numba install.  ``cotree backends`` benchmarks one against the
other.
"""

import os

JIT_ENV_VAR = "COTREE_JIT"


def _jit_requested() -> bool:
    return os.environ.get(JIT_ENV_VAR, "1") not in ("0", "false", "no")


try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    numba = None
    _HAVE_NUMBA = False

JIT_ENABLED = _HAVE_NUMBA and _jit_requested()


def kernel(fn):
    """Compile ``fn`` with numba unless the fallback backend is selected."""
    if JIT_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "python"
