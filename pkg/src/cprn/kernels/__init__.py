"""Kernel backend selection.

The compiled Cython kernels are used when the extension was built; otherwise the
numpy implementations take over. Set ``CPRN_KERNELS=compiled`` or
``CPRN_KERNELS=numpy`` to force a backend (``compiled`` raises if unavailable).
Both backends produce bit-identical results.
"""

import os

import numpy as np

from . import numpy_backend

_requested = os.environ.get("CPRN_KERNELS", "auto")
if _requested not in ("auto", "compiled", "numpy"):
    raise ValueError(f"CPRN_KERNELS must be auto, compiled or numpy, got {_requested!r}")

_compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _convkernels as _compiled
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "CPRN_KERNELS=compiled but the extension is not built; "
                "reinstall with a C compiler or unset CPRN_KERNELS"
            ) from None

if _compiled is not None:
    BACKEND = "compiled"

    def im2col(x, k, s, p):
        return _compiled.im2col(np.ascontiguousarray(x), k, s, p)

    def col2im(cols, h, w, k, s, p):
        return _compiled.col2im(np.ascontiguousarray(cols), h, w, k, s, p)

else:
    BACKEND = "numpy"
    im2col = numpy_backend.im2col
    col2im = numpy_backend.col2im
