"""Backend selection: compiled extension if built, numpy fallback otherwise.

Set RETRIALQ_BACKEND=python to force the fallback (used by the benchmark and
the cross-backend tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("RETRIALQ_BACKEND", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND_NAME = _impl.BACKEND_NAME

pareto_eq_lst = _impl.pareto_eq_lst
solve_one_minus_alpha = _impl.solve_one_minus_alpha
busy_periods = _impl.busy_periods
des_run = _impl.des_run
replication_seed = _impl.replication_seed
xoshiro_uniforms = _impl.xoshiro_uniforms


def available_backends():
    """Name -> module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
