"""Numba switch.

Set ``ARRHENIUS_RD_NUMBA=0`` to run every kernel on its pure-numpy path.
The flag is read once at import; :func:`set_backend` flips it at runtime
(used by the test-suite and the benchmark).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_FLAG = os.environ.get("ARRHENIUS_RD_NUMBA", "1").strip().lower()
_backend = "numba" if (numba is not None and _FLAG not in ("0", "false", "no", "off")) else "numpy"


def njit(func):
    """Compile ``func`` lazily with numba, or hand it back untouched."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not importable")
    _backend = name
