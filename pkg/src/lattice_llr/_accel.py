"""Backend selection for the compiled kernels.

Set ``LATTICE_LLR_BACKEND=numpy`` to force the pure-numpy path. The default
(``auto``) uses numba when it imports cleanly.
"""

import contextlib
import os

try:
    import numba
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


_VALID = ("auto", "numba", "numpy")


def _resolve(name):
    name = (name or "auto").strip().lower()
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return name


_backend = _resolve(os.environ.get("LATTICE_LLR_BACKEND", "auto"))


def get_backend():
    return _backend


def set_backend(name):
    """Switch the active backend; returns the previous one."""
    global _backend
    prev = _backend
    _backend = _resolve(name)
    return prev


@contextlib.contextmanager
def use_backend(name):
    prev = set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)
