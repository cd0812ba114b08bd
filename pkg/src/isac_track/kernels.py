"""Backend selection for the hot solver kernel.

The compiled Cython extension is used when it imports; otherwise, or when
``ISAC_TRACK_PURE_PYTHON=1`` is set, the numpy implementation is used.
"""

import os

from . import _kernels_py

if os.environ.get("ISAC_TRACK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

psg_solve = _impl.psg_solve
penalized_value = _impl.penalized_value
project = _impl.project

__all__ = ["BACKEND", "psg_solve", "penalized_value", "project"]
