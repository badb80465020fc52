"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``DSIGMA_PURE_PYTHON=1`` to force
the numpy fallback (used by the benchmark and the backend-parity tests).
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("DSIGMA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

rim_insert = _impl.rim_insert
count_inversions = _impl.count_inversions
bfs_order = _impl.bfs_order
