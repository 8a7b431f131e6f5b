"""Kernel selection: the compiled extension when importable, else pure Python."""
from __future__ import annotations

import os

from . import _dijkstra_py

try:
    if os.environ.get("MOBIUSKIT_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from ._kernels import grid_dijkstra  # type: ignore[attr-defined]
    BACKEND = "cython"
except ImportError:
    grid_dijkstra = _dijkstra_py.grid_dijkstra
    BACKEND = "python"

__all__ = ["grid_dijkstra", "BACKEND"]
