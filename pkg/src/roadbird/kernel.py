"""Kernel backend selection.

The compiled ``_kernel`` extension is used when it imports; otherwise the
pure-Python twin is used. Set ``ROADBIRD_KERNEL=python`` to force the
fallback.
"""

import importlib
import os

from . import _kernel_py

BACKENDS = ("cython", "python")


def _load_compiled():
    try:
        return importlib.import_module("roadbird._kernel")
    except ImportError:
        return None


_compiled = _load_compiled()

if os.environ.get("ROADBIRD_KERNEL", "").lower() == "python" or _compiled is None:
    default = _kernel_py
else:
    default = _compiled

BACKEND = "cython" if default is _compiled else "python"


def available() -> list[str]:
    return [b for b in BACKENDS if b == "python" or _compiled is not None]


def get(name: str | None = None):
    """Kernel module for ``name`` ("cython" or "python"); None picks the default."""
    if name is None:
        return default
    if name == "python":
        return _kernel_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
