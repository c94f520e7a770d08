"""JIT switch for the sampling kernels.

Kernels are written once in the numba-compatible subset of Python. When numba
is importable and ``GWPRUNE_DISABLE_JIT`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the very same functions run as plain
Python on numpy arrays. Both paths draw from the same ``numpy.random.Generator``
stream, so a given seed yields identical samples either way.
"""
import os

_FLAG = os.environ.get("GWPRUNE_DISABLE_JIT", "0").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and _FLAG in ("", "0", "false", "no")


def jit(fn):
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name():
    return "numba" if JIT_ENABLED else "python"
