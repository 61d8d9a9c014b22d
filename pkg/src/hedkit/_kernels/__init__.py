"""Hot numeric kernels with a compiled core and a numpy fallback.

The Cython extension `_core` is preferred when importable; otherwise the
numpy implementation `_py` is used. Set HEDKIT_PURE_PY=1 to force the
fallback (used by the benchmark and the backend-agreement tests).
"""

import os

if os.environ.get("HEDKIT_PURE_PY"):
    from . import _py as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _py as _impl

        BACKEND = "python"

frame_analyze = _impl.frame_analyze
dtw_table = _impl.dtw_table

__all__ = ["BACKEND", "frame_analyze", "dtw_table"]
