"""Backend selection for the simulation kernels.

The compiled extension is used when importable; otherwise (or when the
environment variable ``VSR_SNCA_PURE=1`` is set) the pure-Python twin is used.
Both expose the same functions and produce identical numbers.
"""

import os

from . import _pykernels as pure

compiled = None
if os.environ.get("VSR_SNCA_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"


def get(name: str | None = None):
    """Return a kernel module: ``"cython"``, ``"python"`` or the active default."""
    if name is None:
        return active
    if name == "python":
        return pure
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
