"""Select the compiled kernels when available, else the numpy fallback.

Set S1CLASSES_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("S1CLASSES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass

hungarian = _impl.hungarian
admm_step = _impl.admm_step

__all__ = ["BACKEND", "hungarian", "admm_step"]
