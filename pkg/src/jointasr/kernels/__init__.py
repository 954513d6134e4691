"""Hot-loop kernel dispatch.

By default the numba-compiled kernels are used; set JOINTASR_NUMBA=0 (or
"false"/"off"/"no") to force the pure numpy/Python reference path. The
fallback also engages automatically when numba is not importable.
`benchmarks/bench_kernels.py` times the two backends against each other.
"""

import os

_flag = os.environ.get("JOINTASR_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

if _want_numba:
    try:
        from . import jitted as _impl

        BACKEND = "numba"
    except ImportError:
        from . import reference as _impl

        BACKEND = "reference"
else:
    from . import reference as _impl

    BACKEND = "reference"

ctc_alpha_beta = _impl.ctc_alpha_beta
edit_ops = _impl.edit_ops
lpc_batch = _impl.lpc_batch

__all__ = ["BACKEND", "ctc_alpha_beta", "edit_ops", "lpc_batch"]
