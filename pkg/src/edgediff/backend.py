"""Pick the compiled kernels when available, the numpy ones otherwise.

Set ``EDGEDIFF_BACKEND=python`` to force the fallback.
"""
import os
import warnings

from . import _kernels_py

NAME = "python"
kernels = _kernels_py

if os.environ.get("EDGEDIFF_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        if os.environ.get("EDGEDIFF_BACKEND", "").lower() == "compiled":
            raise
        warnings.warn("edgediff: compiled kernels unavailable, using numpy fallback", RuntimeWarning)
    else:
        kernels = _compiled
        NAME = "compiled"


def get(name=None):
    """Kernel module by name (``"python"`` / ``"compiled"``), default the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
