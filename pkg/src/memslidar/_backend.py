"""Kernel backend selection.

The compiled extension is used when it imports; set ``MEMSLIDAR_BACKEND=python``
to force the numpy fallback (``cython`` makes a missing extension an error).
"""
from __future__ import annotations

import importlib
import os

from . import _kernels_py


def load(name: str | None = None):
    name = (name or os.environ.get("MEMSLIDAR_BACKEND", "auto")).lower()
    if name == "python":
        return _kernels_py
    try:
        return importlib.import_module("memslidar._kernels")
    except ImportError:
        if name == "cython":
            raise
        return _kernels_py


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module("memslidar._kernels")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


kernels = load()
BACKEND = kernels.BACKEND
