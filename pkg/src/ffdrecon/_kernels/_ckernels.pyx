# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled geometry kernels.

Each function mirrors one in ``_pykernels`` with the same signature and the
same floating-point evaluation order, so both backends agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs, INFINITY

cnp.import_array()


cdef inline double _dot(double ax, double ay, double az,
                        double bx, double by, double bz) noexcept nogil:
    return ax * bx + ay * by + az * bz


cdef double _point_tri_sqdist(double px, double py, double pz,
                              double ax, double ay, double az,
                              double bx, double by, double bz,
                              double cx, double cy, double cz) noexcept nogil:
    # Voronoi-region walk for the closest point on triangle abc.
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = px - ax, apy = py - ay, apz = pz - az
    cdef double d1 = _dot(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot(acx, acy, acz, apx, apy, apz)
    cdef double qx, qy, qz, v, w
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz

    cdef double bpx = px - bx, bpy = py - by, bpz = pz - bz
    cdef double d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
    cdef double d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz

    cdef double vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx = apx - v * abx
        qy = apy - v * aby
        qz = apz - v * abz
        return qx * qx + qy * qy + qz * qz

    cdef double cpx = px - cx, cpy = py - cy, cpz = pz - cz
    cdef double d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
    cdef double d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz

    cdef double vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx = apx - w * acx
        qy = apy - w * acy
        qz = apz - w * acz
        return qx * qx + qy * qy + qz * qz

    cdef double va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bpx - w * (cx - bx)
        qy = bpy - w * (cy - by)
        qz = bpz - w * (cz - bz)
        return qx * qx + qy * qy + qz * qz

    # Face interior: distance to the supporting plane.
    cdef double nx = aby * acz - abz * acy
    cdef double ny = abz * acx - abx * acz
    cdef double nz = abx * acy - aby * acx
    cdef double s = _dot(nx, ny, nz, apx, apy, apz)
    return s * s / _dot(nx, ny, nz, nx, ny, nz)


def points_triangles_sqdist(const double[:, ::1] points, const double[:, :, ::1] tris):
    """Squared distance from each point to the nearest of ``tris``.

    Faces are skipped when their bounding sphere cannot beat the running best;
    the pruning never changes the result, only the work done.
    """
    cdef Py_ssize_t n = points.shape[0], nf = tris.shape[0]
    cdef Py_ssize_t i, f
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if nf == 0:
        out_arr.fill(INFINITY)
        return out_arr
    cen_arr = np.empty((nf, 3), dtype=np.float64)
    rad_arr = np.empty(nf, dtype=np.float64)
    cdef double[:, ::1] cen = cen_arr
    cdef double[::1] rad = rad_arr
    cdef double px, py, pz, best, d, gx, gy, gz, r, s
    cdef int k
    for f in range(nf):
        gx = (tris[f, 0, 0] + tris[f, 1, 0] + tris[f, 2, 0]) / 3.0
        gy = (tris[f, 0, 1] + tris[f, 1, 1] + tris[f, 2, 1]) / 3.0
        gz = (tris[f, 0, 2] + tris[f, 1, 2] + tris[f, 2, 2]) / 3.0
        cen[f, 0] = gx
        cen[f, 1] = gy
        cen[f, 2] = gz
        r = 0.0
        for k in range(3):
            s = sqrt((tris[f, k, 0] - gx) ** 2 + (tris[f, k, 1] - gy) ** 2
                     + (tris[f, k, 2] - gz) ** 2)
            if s > r:
                r = s
        rad[f] = r * (1.0 + 1e-12)
    with nogil:
        for i in range(n):
            px = points[i, 0]
            py = points[i, 1]
            pz = points[i, 2]
            best = INFINITY
            for f in range(nf):
                s = sqrt((px - cen[f, 0]) ** 2 + (py - cen[f, 1]) ** 2
                         + (pz - cen[f, 2]) ** 2) - rad[f]
                if s > 0.0 and s * s >= best:
                    continue
                d = _point_tri_sqdist(px, py, pz,
                                      tris[f, 0, 0], tris[f, 0, 1], tris[f, 0, 2],
                                      tris[f, 1, 0], tris[f, 1, 1], tris[f, 1, 2],
                                      tris[f, 2, 0], tris[f, 2, 1], tris[f, 2, 2])
                if d < best:
                    best = d
            out[i] = best
    return out_arr


def rasterize(const double[:, :, ::1] screen, const double[:, ::1] inv_depth,
              const double[::1] shade, int width, int height):
    """Z-buffered flat-shaded fill of projected triangles.

    ``screen`` holds pixel-space (x, y) per corner, ``inv_depth`` the
    reciprocal camera depth per corner. Returns ``(color, zbuf)`` where
    ``color`` is NaN wherever nothing was drawn.
    """
    color_arr = np.full((height, width), np.nan, dtype=np.float64)
    zbuf_arr = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] color = color_arr
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef Py_ssize_t nf = screen.shape[0], f
    cdef double x0, y0, x1, y1, x2, y2, area, w0, w1, w2, cx, cy, iz
    cdef int xmin, xmax, ymin, ymax, px, py
    with nogil:
        for f in range(nf):
            x0 = screen[f, 0, 0]
            y0 = screen[f, 0, 1]
            x1 = screen[f, 1, 0]
            y1 = screen[f, 1, 1]
            x2 = screen[f, 2, 0]
            y2 = screen[f, 2, 1]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if area == 0.0:
                continue
            xmin = <int>floor(min(x0, min(x1, x2)))
            xmax = <int>floor(max(x0, max(x1, x2)))
            ymin = <int>floor(min(y0, min(y1, y2)))
            ymax = <int>floor(max(y0, max(y1, y2)))
            if xmin < 0:
                xmin = 0
            if ymin < 0:
                ymin = 0
            if xmax > width - 1:
                xmax = width - 1
            if ymax > height - 1:
                ymax = height - 1
            for py in range(ymin, ymax + 1):
                cy = py + 0.5
                for px in range(xmin, xmax + 1):
                    cx = px + 0.5
                    w0 = ((x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)) / area
                    w1 = ((x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)) / area
                    w2 = ((x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)) / area
                    if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                        continue
                    iz = w0 * inv_depth[f, 0] + w1 * inv_depth[f, 1] + w2 * inv_depth[f, 2]
                    if iz > zbuf[py, px]:
                        zbuf[py, px] = iz
                        color[py, px] = shade[f]
    return color_arr, zbuf_arr


cdef bint _axis_test(double p0, double p1, double p2, double rad) noexcept nogil:
    cdef double lo = min(p0, min(p1, p2))
    cdef double hi = max(p0, max(p1, p2))
    return not (lo > rad or hi < -rad)


cdef bint _tri_box(double[3] v0, double[3] v1, double[3] v2,
                   double h) noexcept nogil:
    # Separating-axis test of a triangle (box-centred coordinates) against the
    # cube [-h, h]^3: 9 edge cross axes, 3 box normals, 1 triangle normal.
    cdef double e0[3]
    cdef double e1[3]
    cdef double e2[3]
    cdef double n[3]
    cdef int k
    for k in range(3):
        e0[k] = v1[k] - v0[k]
        e1[k] = v2[k] - v1[k]
        e2[k] = v0[k] - v2[k]
    cdef double* edges[3]
    edges[0] = e0
    edges[1] = e1
    edges[2] = e2
    cdef double ex, ey, ez, rad, p0, p1, p2
    cdef int j
    for j in range(3):
        ex = edges[j][0]
        ey = edges[j][1]
        ez = edges[j][2]
        # axis = x_hat cross e = (0, -ez, ey)
        p0 = -ez * v0[1] + ey * v0[2]
        p1 = -ez * v1[1] + ey * v1[2]
        p2 = -ez * v2[1] + ey * v2[2]
        rad = h * (fabs(ez) + fabs(ey))
        if not _axis_test(p0, p1, p2, rad):
            return False
        # axis = y_hat cross e = (ez, 0, -ex)
        p0 = ez * v0[0] - ex * v0[2]
        p1 = ez * v1[0] - ex * v1[2]
        p2 = ez * v2[0] - ex * v2[2]
        rad = h * (fabs(ez) + fabs(ex))
        if not _axis_test(p0, p1, p2, rad):
            return False
        # axis = z_hat cross e = (-ey, ex, 0)
        p0 = -ey * v0[0] + ex * v0[1]
        p1 = -ey * v1[0] + ex * v1[1]
        p2 = -ey * v2[0] + ex * v2[1]
        rad = h * (fabs(ey) + fabs(ex))
        if not _axis_test(p0, p1, p2, rad):
            return False
    for k in range(3):
        if not _axis_test(v0[k], v1[k], v2[k], h):
            return False
    n[0] = e0[1] * e1[2] - e0[2] * e1[1]
    n[1] = e0[2] * e1[0] - e0[0] * e1[2]
    n[2] = e0[0] * e1[1] - e0[1] * e1[0]
    p0 = n[0] * v0[0] + n[1] * v0[1] + n[2] * v0[2]
    rad = h * (fabs(n[0]) + fabs(n[1]) + fabs(n[2]))
    return fabs(p0) <= rad


def mark_surface_voxels(const double[:, :, ::1] tris, const double[::1] origin,
                        double voxel_size, int res):
    """Boolean ``(res, res, res)`` grid, indexed ``[x, y, z]``, of voxels
    touched by any triangle (closed boxes: touching counts)."""
    out_arr = np.zeros((res, res, res), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    cdef Py_ssize_t nf = tris.shape[0], f
    cdef double h = 0.5 * voxel_size * (1.0 + 1e-9)
    cdef int lo[3]
    cdef int hi[3]
    cdef double mn, mx
    cdef double v0[3]
    cdef double v1[3]
    cdef double v2[3]
    cdef double c[3]
    cdef int i, j, k, a
    with nogil:
        for f in range(nf):
            for a in range(3):
                mn = min(tris[f, 0, a], min(tris[f, 1, a], tris[f, 2, a]))
                mx = max(tris[f, 0, a], max(tris[f, 1, a], tris[f, 2, a]))
                lo[a] = <int>floor((mn - origin[a]) / voxel_size - 1e-9)
                hi[a] = <int>floor((mx - origin[a]) / voxel_size + 1e-9)
                if lo[a] < 0:
                    lo[a] = 0
                if hi[a] > res - 1:
                    hi[a] = res - 1
            for i in range(lo[0], hi[0] + 1):
                c[0] = origin[0] + (i + 0.5) * voxel_size
                for j in range(lo[1], hi[1] + 1):
                    c[1] = origin[1] + (j + 0.5) * voxel_size
                    for k in range(lo[2], hi[2] + 1):
                        if out[i, j, k]:
                            continue
                        c[2] = origin[2] + (k + 0.5) * voxel_size
                        for a in range(3):
                            v0[a] = tris[f, 0, a] - c[a]
                            v1[a] = tris[f, 1, a] - c[a]
                            v2[a] = tris[f, 2, a] - c[a]
                        if _tri_box(v0, v1, v2, h):
                            out[i, j, k] = 1
    return out_arr.astype(bool)
