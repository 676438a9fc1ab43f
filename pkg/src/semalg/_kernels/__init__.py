"""Hot numeric kernels with a compiled core and a pure-Python fallback.

The Cython extension ``semalg._kernels._core`` is selected when importable;
otherwise the identical pure-Python implementation in ``_pure`` is used.
Set ``SEMALG_FORCE_PURE=1`` to force the fallback (the benchmark and the
backend-parity tests rely on this).
"""
from __future__ import annotations

import os

from . import _pure

if os.environ.get("SEMALG_FORCE_PURE"):
    _impl = _pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

BACKEND: str = _impl.BACKEND
min_code_over_perms = _impl.min_code_over_perms
bareiss_rank = _impl.bareiss_rank
ricf_core = _impl.ricf_core

pure = _pure


def compiled_available() -> bool:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True
