"""Kernel backend selection: compiled extension with pure-numpy fallback.

The compiled Cython module is used when it imported successfully; setting
``PIRM_PURE_PYTHON=1`` in the environment forces the numpy fallback.  Both
backends implement identical semantics (tests enforce bit-equality), so
the choice only affects speed.
"""

import os

from pirm import _kernels_py

if os.environ.get("PIRM_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from pirm import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

span_counts = _impl.span_counts
add_walk = _impl.add_walk
tw_rotate = _impl.tw_rotate


def available_backends() -> dict[str, object]:
    """Importable backend modules, keyed by name (for benchmarking)."""
    backends: dict[str, object] = {"python": _kernels_py}
    try:
        from pirm import _kernels_cy

        backends["compiled"] = _kernels_cy
    except ImportError:
        pass
    return backends
