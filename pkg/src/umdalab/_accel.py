"""Optional numba acceleration.

Set ``UMDALAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths (useful
for debugging, for platforms without numba, and for the backend benchmark).
"""
import os

_FLAG = "UMDALAB_DISABLE_NUMBA"

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    NUMBA_AVAILABLE = False


def numba_enabled():
    """True when numba is importable and not disabled through the env flag."""
    if not NUMBA_AVAILABLE:
        return False
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def njit(func=None, **kwargs):
    """``numba.njit`` with caching on; identity decorator when numba is missing."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        return numba.njit(**kwargs)(f) if NUMBA_AVAILABLE else f

    return wrap(func) if func is not None else wrap


def resolve_backend(backend=None):
    """Map ``None``/"auto"/"numba"/"numpy" to the backend that will actually run."""
    if backend in (None, "auto"):
        return "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not installed")
        return "numba"
    if backend == "numpy":
        return "numpy"
    raise ValueError(f"unknown backend {backend!r}")
