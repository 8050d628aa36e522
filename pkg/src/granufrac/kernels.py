"""DEM kernel backend selection.

Prefers the compiled extension (granufrac._core); falls back to the
pure-numpy implementation when the extension is missing. Override with
GRANUFRAC_BACKEND=python|cython.
"""

from __future__ import annotations

import os

from . import kernels_py


def _select():
    choice = os.environ.get("GRANUFRAC_BACKEND", "").strip().lower()
    if choice == "python":
        return kernels_py
    try:
        from . import _core
    except ImportError:
        if choice == "cython":
            raise ImportError(
                "GRANUFRAC_BACKEND=cython but granufrac._core is not built; "
                "reinstall with the extension compiled")
        return kernels_py
    return _core


_backend = _select()
compute_forces = _backend.compute_forces
BACKEND_NAME = _backend.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return a kernel module by name ("python" / "cython" / None=active)."""
    if name is None:
        return _backend
    if name == "python":
        return kernels_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
