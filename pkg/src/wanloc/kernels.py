"""Kernel selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Setting ``WANLOC_PURE_PYTHON=1`` forces the
fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
mv_terms = _kernels_py.mv_terms

if os.environ.get("WANLOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        BACKEND = "cython"
        mv_terms = _compiled.mv_terms
