"""Backend selection for the hot evaluation kernels.

Prefers the compiled extension (paisc._native); falls back to the pure-numpy
implementation when the extension is not built. Set PAISC_PURE=1 to force the
fallback (used by the backend parity tests and the kernel benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("PAISC_PURE"):
    from paisc import _kernels_py as _impl
else:
    try:
        from paisc import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        from paisc import _kernels_py as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND_NAME

eval_expr_batch = _impl.eval_expr_batch
indicator_batch = _impl.indicator_batch
mixture_logpdf = _impl.mixture_logpdf
