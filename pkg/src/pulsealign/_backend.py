"""Kernel backend selection: compiled Cython extension if importable,
pure-Python/numpy otherwise. ``PULSEALIGN_PURE_PYTHON=1`` forces the
fallback (useful for benchmarking and debugging)."""

import os

from . import _kernels_py

if os.environ.get("PULSEALIGN_PURE_PYTHON"):
    _impl = _kernels_py
    USING_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        USING_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        USING_COMPILED = False

allocate_grid = _impl.allocate_grid
cursor_join = _impl.cursor_join
sos_filter = _impl.sos_filter
kalman_track = _impl.kalman_track


def backend_name():
    return "compiled" if USING_COMPILED else "pure-python"
