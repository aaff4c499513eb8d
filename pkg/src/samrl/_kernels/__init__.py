"""Kernel backend selection.

The compiled Cython core is used when it imports cleanly; otherwise the
NumPy fallback takes over. Set SAMRL_BACKEND=python or SAMRL_BACKEND=compiled
to force one (the latter raises if the extension is missing). Both backends
implement the same functions; within a backend results are deterministic,
across backends they agree to rounding error only.
"""

import os

from . import py_backend

_requested = os.environ.get("SAMRL_BACKEND", "auto")
if _requested not in ("auto", "python", "compiled"):
    raise RuntimeError(
        f"SAMRL_BACKEND must be auto, python or compiled, got {_requested!r}"
    )

if _requested == "python":
    _impl = py_backend
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = py_backend

BACKEND = _impl.NAME

mlp_forward = _impl.mlp_forward
mlp_forward_cached = _impl.mlp_forward_cached
mlp_backward = _impl.mlp_backward
scaled_add = _impl.scaled_add
scale_inplace = _impl.scale_inplace
sq_norm = _impl.sq_norm
