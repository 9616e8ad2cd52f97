"""Backend selection for the hot loops.

The compiled extension is preferred; ``DECLAB_PURE_PYTHON=1`` forces the
NumPy fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback

if os.environ.get("DECLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

coherence_product = _impl.coherence_product
log_coherence_abs = _impl.log_coherence_abs
propagate_linear2 = _impl.propagate_linear2

__all__ = ["BACKEND", "coherence_product", "log_coherence_abs", "propagate_linear2"]
