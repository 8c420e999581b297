"""Optional numba acceleration.

Hot kernels are written so they run either compiled with ``numba.njit`` or as
plain Python/numpy. Set ``MACRONODE_DISABLE_NUMBA=1`` to force the fallback
path (also used automatically when numba is not importable).
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("MACRONODE_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def try_jit(fn=None, **kwargs):
    """Compile ``fn`` with ``numba.njit`` when acceleration is enabled.

    Usable bare (``@try_jit``) or with numba keyword arguments
    (``@try_jit(cache=True)``). With acceleration off the function is
    returned unchanged.
    """

    def wrap(f):
        if not USE_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    if fn is None:
        return wrap
    return wrap(fn)


def force_jit(fn, **kwargs):
    """Always compile, regardless of the env flag (used by the benchmark)."""
    if not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    return numba.njit(**kwargs)(fn)
