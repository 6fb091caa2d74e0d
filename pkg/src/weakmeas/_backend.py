"""Backend selection for the hot numeric kernels.

Numba is used when importable unless ``WEAKMEAS_BACKEND=numpy`` is set in the
environment. Every kernel also has a pure-numpy implementation, so the package
works (more slowly for some kernels) without numba.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on hosts with an old TBB
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    prange = range


_VALID = ("numba", "numpy")


def _initial_backend() -> str:
    requested = os.environ.get("WEAKMEAS_BACKEND", "").strip().lower()
    if requested == "numpy":
        return "numpy"
    if requested not in ("", "numba"):
        raise ValueError(f"WEAKMEAS_BACKEND must be one of {_VALID}, got {requested!r}")
    return "numba" if NUMBA_AVAILABLE else "numpy"


_state = {"backend": _initial_backend()}


def get_backend() -> str:
    return _state["backend"]


def set_backend(name: str) -> None:
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not installed")
    _state["backend"] = name


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily switch the kernel backend."""
    previous = get_backend()
    set_backend(name)
    try:
        yield
    finally:
        _state["backend"] = previous
