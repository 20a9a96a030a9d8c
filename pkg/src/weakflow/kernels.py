"""Kernel backend selection.

Imports the compiled extension when it is available, otherwise falls back to
the pure-Python implementation.  Set ``WEAKFLOW_PURE_PYTHON=1`` to force the
fallback (useful for benchmarking and debugging).
"""

import os

if os.environ.get("WEAKFLOW_PURE_PYTHON", "") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

STATUS_OK = _impl.STATUS_OK
STATUS_NODE = _impl.STATUS_NODE
STATUS_STEP_FAILURE = _impl.STATUS_STEP_FAILURE
STATUS_EXITED = _impl.STATUS_EXITED

envelope_norm = _impl.envelope_norm
kw_point = _impl.kw_point
integrate_line = _impl.integrate_line
backend_name = _impl.backend_name
