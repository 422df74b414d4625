"""Hot geometry kernels with a compiled backend and a numpy fallback.

The compiled module is used when it imports and ``FFDRECON_PURE_PYTHON`` is
unset or ``0``. ``BACKEND`` records which one is active.
"""

import os

from . import _pykernels

_force_py = os.environ.get("FFDRECON_PURE_PYTHON", "0") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

points_triangles_sqdist = _impl.points_triangles_sqdist
rasterize = _impl.rasterize
mark_surface_voxels = _impl.mark_surface_voxels


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out

__all__ = [
    "BACKEND",
    "available_backends",
    "mark_surface_voxels",
    "points_triangles_sqdist",
    "rasterize",
]
