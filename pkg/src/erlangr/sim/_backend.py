"""Simulation kernel backend selection.

The compiled kernel is preferred when importable; the pure-Python kernel is
a drop-in replacement producing bit-identical output for the same seed.
Set ERLANGR_FORCE_BACKEND=python or =compiled to override.
"""
from __future__ import annotations

import os

from . import _kernel_py

_FORCE = os.environ.get("ERLANGR_FORCE_BACKEND", "").strip().lower()

if _FORCE == "python":
    _impl = _kernel_py
    BACKEND = "python"
elif _FORCE == "compiled":
    from . import _kernel_cy as _impl  # noqa: F401  (raises if unavailable)

    BACKEND = "compiled"
else:
    try:
        from . import _kernel_cy as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernel_py
        BACKEND = "python"

run_stationary = _impl.run_stationary
run_stationary_python = _kernel_py.run_stationary
