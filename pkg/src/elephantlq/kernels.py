"""Backend selection for the Monte Carlo kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  ``ELEPHANTLQ_BACKEND=python`` forces the numpy
path and ``ELEPHANTLQ_BACKEND=compiled`` makes a missing extension an error.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:  # pragma: no cover - depends on the build
    from . import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

BACKENDS = ("compiled", "python")


def available_backends() -> tuple[str, ...]:
    return BACKENDS if _ckernels is not None else ("python",)


def _select(name: str | None) -> str:
    name = (name or "auto").lower()
    if name == "auto":
        return "compiled" if _ckernels is not None else "python"
    if name == "compiled" and _ckernels is None:
        raise ImportError("compiled kernels requested but elephantlq._ckernels is not built")
    if name not in BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    return name


BACKEND = _select(os.environ.get("ELEPHANTLQ_BACKEND"))


def euler_chunk(*args, backend: str | None = None, **kwargs):
    """Dispatch to the selected backend; arrays are made contiguous float64."""
    name = BACKEND if backend is None else _select(backend)
    args = [np.ascontiguousarray(a, dtype=float) if isinstance(a, np.ndarray) else a
            for a in args]
    if name == "compiled":
        return _ckernels.euler_chunk(*args, **kwargs)
    return _kernels_py.euler_chunk(*args, **kwargs)
