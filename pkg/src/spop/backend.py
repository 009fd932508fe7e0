"""Kernel backend selection.

Prefers the compiled extension when it is built; falls back to the numpy
implementation otherwise.  Set SPOP_PURE_PYTHON=1 to force the fallback
(useful for the kernel benchmark and for debugging).
"""

import os

if os.environ.get("SPOP_PURE_PYTHON", "0") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

svd_sweeps = _impl.svd_sweeps
eig_sweeps = _impl.eig_sweeps
