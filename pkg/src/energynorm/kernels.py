"""Selects the SVR kernel implementation at import time.

The compiled ``_svr_core`` extension is used when it was built; otherwise, or
when ``ENERGYNORM_PURE_PYTHON=1`` is set, the NumPy fallback is used. Both
expose ``svr_solve``, ``svr_objective`` and ``best_offset`` with identical
signatures.
"""

import os

from . import _svr_py

BACKEND = "python"
_impl = _svr_py

if os.environ.get("ENERGYNORM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _svr_core as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

svr_solve = _impl.svr_solve
svr_objective = _impl.svr_objective
best_offset = _impl.best_offset


def implementations():
    """All importable backends by name, for cross-checking and benchmarks."""
    out = {"python": _svr_py}
    try:
        from . import _svr_core

        out["cython"] = _svr_core
    except ImportError:
        pass
    return out
