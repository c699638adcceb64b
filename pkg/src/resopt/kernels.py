"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
fallback. Set ``RESOPT_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("RESOPT_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

simulate_batch = _impl.simulate_batch
objective_sums = _impl.objective_sums
dominated_count = _impl.dominated_count


def backends():
    """Available backend modules keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
