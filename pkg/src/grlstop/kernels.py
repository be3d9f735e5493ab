"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``GRLSTOP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("GRLSTOP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

logistic_loss_grad = _impl.logistic_loss_grad
knee_scan = _impl.knee_scan
gae = _impl.gae

__all__ = ["BACKEND", "logistic_loss_grad", "knee_scan", "gae"]
