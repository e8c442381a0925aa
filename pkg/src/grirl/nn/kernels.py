"""Kernel backend selection.

The compiled extension is used when it was built; ``GRIRL_PURE_PYTHON=1``
forces the numpy fallback.
"""

from __future__ import annotations

import os

if os.environ.get("GRIRL_PURE_PYTHON", "") not in ("", "0"):
    from grirl.nn import _kernels_py as _impl
else:
    try:
        from grirl.nn import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from grirl.nn import _kernels_py as _impl

dense_forward = _impl.dense_forward
dense_backward = _impl.dense_backward
BACKEND: str = _impl.BACKEND
