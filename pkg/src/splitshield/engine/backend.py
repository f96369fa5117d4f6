"""Kernel backend selection.

The compiled Cython extension is preferred when it was built; otherwise the
NumPy fallback is used. `SPLITSHIELD_KERNELS=python|cython` forces a choice
at import time, and `set_backend` switches at runtime (used by tests and the
kernel benchmark).
"""

import os

from . import kernels_py

_BACKENDS = {"python": kernels_py}

try:
    from . import _kernels
    _BACKENDS["cython"] = _kernels
except ImportError:  # extension not built; fallback only
    pass


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _initial() -> str:
    forced = os.environ.get("SPLITSHIELD_KERNELS")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"SPLITSHIELD_KERNELS={forced!r} but available backends are "
                f"{available_backends()}")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


_active = _initial()


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = name


def kernels():
    """The active kernel module."""
    return _BACKENDS[_active]
