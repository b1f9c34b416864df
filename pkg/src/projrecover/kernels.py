"""Kernel backend selection.

The compiled extension is preferred; set ``PROJRECOVER_PURE_PYTHON=1`` to
force the numpy fallback (the test-suite exercises both).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("PROJRECOVER_PURE_PYTHON"):
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

wedge = _impl.wedge
wedge_left_matrix = _impl.wedge_left_matrix
compound = _impl.compound


def backends():
    """Return the available kernel modules keyed by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels_c

        found["cython"] = _kernels_c
    except ImportError:
        pass
    return found
