"""Kernel backend selection: compiled extension with a NumPy fallback.

The compiled module (tacflow._native, Cython) and the NumPy module expose the
same three kernels. Selection order: explicit argument, the TACFLOW_BACKEND
environment variable ("native" or "python"), then native if importable.
"""

import os

from . import _numpy_kernels

try:
    from .. import _native
except ImportError:
    _native = None

_BACKENDS = {"python": _numpy_kernels}
if _native is not None:
    _BACKENDS["native"] = _native


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    forced = os.environ.get("TACFLOW_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ValueError(
                f"TACFLOW_BACKEND={forced!r} unavailable; "
                f"choices: {available_backends()}"
            )
        return forced
    return "native" if "native" in _BACKENDS else "python"


def get_kernels(backend: str | None = None):
    """Returns the kernel module for `backend` (None or "auto" = default)."""
    if backend is None or backend == "auto":
        backend = default_backend()
    try:
        return _BACKENDS[backend]
    except KeyError:
        raise ValueError(
            f"unknown backend {backend!r}; choices: {available_backends()}"
        ) from None
