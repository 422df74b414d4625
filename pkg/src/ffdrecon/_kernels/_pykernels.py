"""Pure numpy versions of the compiled geometry kernels.

Used when the extension is not built, or when ``FFDRECON_PURE_PYTHON`` is set.
Arithmetic follows ``_ckernels.pyx`` step for step.
"""

import numpy as np

# Pairs (points x faces) evaluated per distance block; bounds peak memory.
_BLOCK = 1 << 18


def _point_tri_sqdist(p, a, b, c):
    """Broadcasting closest-point walk; ``p`` is (n, 1, 3), corners (1, f, 3)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("...k,...k->...", ab, ap)
    d2 = np.einsum("...k,...k->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...k,...k->...", ab, bp)
    d4 = np.einsum("...k,...k->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...k,...k->...", ab, cp)
    d6 = np.einsum("...k,...k->...", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        # Face interior: distance to the supporting plane.
        nx = ab[..., 1] * ac[..., 2] - ab[..., 2] * ac[..., 1]
        ny = ab[..., 2] * ac[..., 0] - ab[..., 0] * ac[..., 2]
        nz = ab[..., 0] * ac[..., 1] - ab[..., 1] * ac[..., 0]
        s = nx * ap[..., 0] + ny * ap[..., 1] + nz * ap[..., 2]
        out = s * s / (nx * nx + ny * ny + nz * nz)

        # Later assignments win, so regions are applied in reverse priority.
        in_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        q = bp - w_bc[..., None] * (c - b)
        out = np.where(in_bc, np.einsum("...k,...k->...", q, q), out)

        in_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
        w_ac = d2 / (d2 - d6)
        q = ap - w_ac[..., None] * ac
        out = np.where(in_ac, np.einsum("...k,...k->...", q, q), out)

        in_c = (d6 >= 0.0) & (d5 <= d6)
        out = np.where(in_c, np.einsum("...k,...k->...", cp, cp), out)

        in_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
        v_ab = d1 / (d1 - d3)
        q = ap - v_ab[..., None] * ab
        out = np.where(in_ab, np.einsum("...k,...k->...", q, q), out)

        in_b = (d3 >= 0.0) & (d4 <= d3)
        out = np.where(in_b, np.einsum("...k,...k->...", bp, bp), out)

        in_a = (d1 <= 0.0) & (d2 <= 0.0)
        out = np.where(in_a, np.einsum("...k,...k->...", ap, ap), out)
    return out


def points_triangles_sqdist(points, tris):
    points = np.ascontiguousarray(points, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.float64)
    n, nf = len(points), len(tris)
    out = np.empty(n, dtype=np.float64)
    if nf == 0:
        out.fill(np.inf)
        return out
    a, b, c = (tris[None, :, k, :] for k in range(3))
    step = max(1, _BLOCK // nf)
    for start in range(0, n, step):
        p = points[start:start + step, None, :]
        out[start:start + step] = _point_tri_sqdist(p, a, b, c).min(axis=1)
    return out


def rasterize(screen, inv_depth, shade, width, height):
    color = np.full((height, width), np.nan)
    zbuf = np.zeros((height, width))
    for f in range(len(screen)):
        (x0, y0), (x1, y1), (x2, y2) = screen[f]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        xmin = max(int(np.floor(min(x0, x1, x2))), 0)
        xmax = min(int(np.floor(max(x0, x1, x2))), width - 1)
        ymin = max(int(np.floor(min(y0, y1, y2))), 0)
        ymax = min(int(np.floor(max(y0, y1, y2))), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        cy = (np.arange(ymin, ymax + 1) + 0.5)[:, None]
        cx = (np.arange(xmin, xmax + 1) + 0.5)[None, :]
        w0 = ((x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)) / area
        w1 = ((x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)) / area
        w2 = ((x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)) / area
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        iz = w0 * inv_depth[f, 0] + w1 * inv_depth[f, 1] + w2 * inv_depth[f, 2]
        zb = zbuf[ymin:ymax + 1, xmin:xmax + 1]
        win = inside & (iz > zb)
        zb[win] = iz[win]
        color[ymin:ymax + 1, xmin:xmax + 1][win] = shade[f]
    return color, zbuf


def _axis_ok(p0, p1, p2, rad):
    lo = np.minimum(p0, np.minimum(p1, p2))
    hi = np.maximum(p0, np.maximum(p1, p2))
    return ~((lo > rad) | (hi < -rad))


def _tri_box(v0, v1, v2, h):
    """Vectorised separating-axis test; corners are (k, 3) box-centred."""
    ok = np.ones(len(v0), dtype=bool)
    e = (v1 - v0, v2 - v1, v0 - v2)
    for ed in e:
        ex, ey, ez = ed[:, 0], ed[:, 1], ed[:, 2]
        for ax in (
            (0.0, -ez, ey),
            (ez, 0.0, -ex),
            (-ey, ex, 0.0),
        ):
            p = [ax[0] * v[:, 0] + ax[1] * v[:, 1] + ax[2] * v[:, 2] for v in (v0, v1, v2)]
            rad = h * (np.abs(ax[0]) + np.abs(ax[1]) + np.abs(ax[2]))
            ok &= _axis_ok(p[0], p[1], p[2], rad)
    for k in range(3):
        ok &= _axis_ok(v0[:, k], v1[:, k], v2[:, k], h)
    n = np.cross(e[0], e[1])
    d = np.einsum("ij,ij->i", n, v0)
    ok &= np.abs(d) <= h * np.abs(n).sum(axis=1)
    return ok


def mark_surface_voxels(tris, origin, voxel_size, res):
    tris = np.asarray(tris, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    out = np.zeros((res, res, res), dtype=bool)
    h = 0.5 * voxel_size * (1.0 + 1e-9)
    for tri in tris:
        lo = np.floor((tri.min(axis=0) - origin) / voxel_size - 1e-9).astype(int)
        hi = np.floor((tri.max(axis=0) - origin) / voxel_size + 1e-9).astype(int)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, res - 1)
        if np.any(lo > hi):
            continue
        idx = np.stack(
            np.meshgrid(*(np.arange(lo[a], hi[a] + 1) for a in range(3)), indexing="ij"),
            axis=-1,
        ).reshape(-1, 3)
        centers = origin + (idx + 0.5) * voxel_size
        hit = _tri_box(tri[0] - centers, tri[1] - centers, tri[2] - centers, h)
        sel = idx[hit]
        out[sel[:, 0], sel[:, 1], sel[:, 2]] = True
    return out
