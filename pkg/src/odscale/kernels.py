"""Kernel backend selection.

The hot inner loops (fundamental-diagram evaluation, grid sweeps) exist
twice: a Cython extension built at install time and a pure-numpy fallback.
The compiled module is preferred when importable; setting the environment
variable ``ODSCALE_PURE_PYTHON=1`` forces the fallback, which is handy for
debugging and for the backend benchmark.
"""

from __future__ import annotations

import os

from . import _fdcore_py

if os.environ.get("ODSCALE_PURE_PYTHON") == "1":
    _impl = _fdcore_py
    BACKEND = "python"
else:
    try:
        from . import _fdcore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fdcore_py
        BACKEND = "python"

segment_state = _impl.segment_state
segment_time_grads = _impl.segment_time_grads
path_sums = _impl.path_sums
objective_with_grad = _impl.objective_with_grad
objective_batch = _impl.objective_batch
