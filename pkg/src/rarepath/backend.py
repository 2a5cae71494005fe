"""VM backend selection.

The hot kernels (trace execution, coverage execution, fuzzing campaigns) are
compiled with numba by default.  Setting ``RAREPATH_PURE=1`` in the
environment selects the pure-Python fallback, which produces bit-identical
results, only slower; the fallback is also chosen automatically when numba
is not importable.
"""

from __future__ import annotations

import os

ENV_FLAG = "RAREPATH_PURE"


def _pick():
    if os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on"):
        from . import _vm_pure

        return _vm_pure
    try:
        from . import _vm_numba

        return _vm_numba
    except ImportError:
        from . import _vm_pure

        return _vm_pure


_active = None


def get_backend(name: str = None):
    """The active VM module; ``name`` forces "pure" or "numba"."""
    global _active
    if name == "pure":
        from . import _vm_pure

        return _vm_pure
    if name == "numba":
        from . import _vm_numba

        return _vm_numba
    if name is not None:
        raise ValueError(f"unknown backend {name!r}")
    if _active is None:
        _active = _pick()
    return _active
