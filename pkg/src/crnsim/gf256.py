"""GF(256) arithmetic backend selection.

The compiled extension is preferred; set ``CRNSIM_PURE_PYTHON=1`` to force the
pure-Python kernels. ``BACKEND`` names the active implementation.
"""

import os

if os.environ.get("CRNSIM_PURE_PYTHON"):
    from crnsim import _gf256_py as _impl
else:
    try:
        from crnsim import _gf256_ext as _impl
    except ImportError:  # extension not built
        from crnsim import _gf256_py as _impl

BACKEND = "cython" if _impl.__name__.endswith("_ext") else "python"

POLY = _impl.POLY
mul = _impl.mul
inv = _impl.inv
scale = _impl.scale
axpy = _impl.axpy
combine = _impl.combine
rank = _impl.rank
solve = _impl.solve
Span = _impl.Span

__all__ = ["BACKEND", "POLY", "mul", "inv", "scale", "axpy", "combine", "rank", "solve", "Span"]
