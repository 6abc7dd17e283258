"""Kernel backend selection.

The compiled extension (`_speedups`, Cython) is preferred when importable;
the pure-numpy `reference` module is the fallback.  Selection happens once
at import and can be forced with LABELMINE_BACKEND=compiled|numpy|auto.
"""

from __future__ import annotations

import os

from . import reference

_choice = os.environ.get("LABELMINE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "numpy"):
    raise ValueError(
        f"LABELMINE_BACKEND must be auto, compiled or numpy, got {_choice!r}"
    )

compiled = None
if _choice in ("auto", "compiled"):
    try:
        from . import _speedups as compiled
    except ImportError:
        compiled = None
    if _choice == "compiled" and compiled is None:
        raise ImportError(
            "LABELMINE_BACKEND=compiled but the _speedups extension is not built"
        )

kernels = compiled if compiled is not None else reference


def active_backend() -> str:
    """Name of the backend picked at import: 'compiled' or 'numpy'."""
    return "compiled" if kernels is not reference else "numpy"


def get_kernels(name: str = "active"):
    """Kernel module by name ('active', 'compiled' or 'numpy')."""
    if name == "active":
        return kernels
    if name == "numpy":
        return reference
    if name == "compiled":
        if compiled is None:
            raise ImportError("the _speedups extension is not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
