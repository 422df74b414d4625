"""Small procedural meshes used as graph templates and in tests."""

import numpy as np

from .mesh import Mesh


def box_mesh(subdivisions=1, size=(1.0, 1.0, 1.0), center=(0.5, 0.5, 0.5)) -> Mesh:
    """Closed axis-aligned box with outward-facing triangles.

    Each side is an ``subdivisions x subdivisions`` grid of quads; shared edge
    vertices are welded so the surface is watertight.
    """
    n = int(subdivisions)
    if n < 1:
        raise ValueError("subdivisions must be >= 1")
    size = np.asarray(size, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    t = np.linspace(-0.5, 0.5, n + 1)

    keys = {}
    verts = []
    faces = []

    def vid(p):
        k = tuple(np.round(p * 2 * n).astype(int))
        if k not in keys:
            keys[k] = len(verts)
            verts.append(p)
        return keys[k]

    for axis in range(3):
        u_ax, v_ax = (axis + 1) % 3, (axis + 2) % 3
        for sign in (-1.0, 1.0):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for a in range(n + 1):
                for b in range(n + 1):
                    p = np.zeros(3)
                    p[axis] = 0.5 * sign
                    p[u_ax] = t[a]
                    p[v_ax] = t[b]
                    grid[a, b] = vid(p)
            for a in range(n):
                for b in range(n):
                    q = (grid[a, b], grid[a + 1, b], grid[a + 1, b + 1], grid[a, b + 1])
                    # (u, v, axis) is right-handed, so CCW in (u, v) faces +axis.
                    if sign < 0:
                        q = q[::-1]
                    faces.append((q[0], q[1], q[2]))
                    faces.append((q[0], q[2], q[3]))
    v = np.array(verts) * size + center
    return Mesh(v, np.array(faces))


def single_triangle(a=(0.0, 0.0, 0.0), b=(1.0, 0.0, 0.0), c=(0.0, 1.0, 0.0)) -> Mesh:
    return Mesh(np.array([a, b, c], dtype=np.float64), np.array([[0, 1, 2]]))
