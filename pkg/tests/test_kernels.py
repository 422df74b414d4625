"""The compiled and pure-Python kernel backends must agree."""

import numpy as np
import pytest

from ffdrecon import _kernels
from ffdrecon._kernels import _pykernels

try:
    from ffdrecon._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_reported():
    assert _kernels.BACKEND in _kernels.available_backends()
    assert "python" in _kernels.available_backends()


@needs_ext
def test_distance_backends_agree(rng):
    pts = rng.normal(size=(300, 3))
    tris = rng.normal(size=(40, 3, 3))
    a = _ckernels.points_triangles_sqdist(pts, tris)
    b = _pykernels.points_triangles_sqdist(pts, tris)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_ext
def test_raster_backends_agree(rng):
    screen = rng.uniform(-5, 40, size=(30, 3, 2))
    inv = rng.uniform(0.1, 1.0, size=(30, 3))
    shade = rng.uniform(0, 1, size=30)
    ca, za = _ckernels.rasterize(screen, inv, shade, 37, 29)
    cb, zb = _pykernels.rasterize(screen, inv, shade, 37, 29)
    assert np.array_equal(np.isnan(ca), np.isnan(cb))
    assert np.array_equal(np.nan_to_num(ca), np.nan_to_num(cb))
    assert np.array_equal(za, zb)


@needs_ext
def test_voxel_backends_agree(rng):
    tris = rng.uniform(0, 1, size=(25, 3, 3))
    origin = np.full(3, -0.1)
    a = _ckernels.mark_surface_voxels(tris, origin, 1.2 / 12, 12)
    b = _pykernels.mark_surface_voxels(tris, origin, 1.2 / 12, 12)
    assert np.array_equal(a, b)


def test_python_voxels_mark_single_triangle():
    tri = np.array([[[0.05, 0.05, 0.5], [0.95, 0.05, 0.5], [0.05, 0.95, 0.5]]])
    g = _pykernels.mark_surface_voxels(tri, np.zeros(3), 0.1, 10)
    # z = 0.5 is a voxel boundary: both layers 4 and 5 touch it
    assert set(np.unique(np.nonzero(g)[2])) == {4, 5}
