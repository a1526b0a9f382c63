"""Integration kernels with a compiled backend and a pure-Python fallback.

The compiled module is used when it imports and the field is one of the
built-in kinds. ``KOOPGEN_BACKEND=python`` forces the fallback.
"""
import os

from . import _pykernels
from ._pykernels import FIELD_CUSTOM, FIELD_LINEAR, FIELD_VANDERPOL

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = [
    "FIELD_CUSTOM",
    "FIELD_LINEAR",
    "FIELD_VANDERPOL",
    "available_backends",
    "backend_for",
    "default_backend",
]


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "compiled")
    return names


def default_backend():
    forced = os.environ.get("KOOPGEN_BACKEND", "").strip().lower()
    if forced in ("python", "py"):
        return "python"
    return "compiled" if _ckernels is not None else "python"


def backend_for(kind, backend=None):
    """Kernel module to use for a field of the given kind."""
    name = backend or default_backend()
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _ckernels is not None and kind != FIELD_CUSTOM:
        return _ckernels
    return _pykernels
