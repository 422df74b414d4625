"""Triangle meshes: OBJ I/O, normalisation, surface sampling, point-to-surface
distance and solid voxelisation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import _kernels

log = logging.getLogger(__name__)


class MeshError(ValueError):
    """Invalid or degenerate mesh input."""


class ObjParseError(MeshError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Mesh:
    """Vertex array ``(N, 3)`` plus 0-based triangle index array ``(F, 3)``."""

    vertices: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                raise MeshError(
                    f"face index out of range (vertex count {len(v)}, "
                    f"indices span {f.min()}..{f.max()})"
                )
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise MeshError("face references the same vertex twice")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def triangles(self) -> np.ndarray:
        """Corner coordinates, shape ``(F, 3, 3)``."""
        return self.vertices[self.faces]

    def bounds(self):
        if not self.n_vertices:
            raise MeshError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def face_areas(self) -> np.ndarray:
        t = self.triangles
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def with_vertices(self, vertices) -> "Mesh":
        return Mesh(vertices, self.faces)

    def __repr__(self):
        return f"Mesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


# --------------------------------------------------------------------------- I/O


def load_obj(path) -> Mesh:
    """Read ``v`` and ``f`` records of a Wavefront OBJ file.

    Face tokens may carry ``/vt/vn`` suffixes (dropped). Polygons are fan
    triangulated. Negative (relative) indices are resolved as in the OBJ
    convention.
    """
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError(path, lineno, "vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise ObjParseError(path, lineno, str(exc)) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ObjParseError(path, lineno, "face needs at least 3 vertices")
                idx = []
                for tok in parts[1:]:
                    try:
                        k = int(tok.split("/")[0])
                    except ValueError:
                        raise ObjParseError(path, lineno, f"bad face token {tok!r}") from None
                    if k == 0:
                        raise ObjParseError(path, lineno, "OBJ indices are 1-based")
                    idx.append(k - 1 if k > 0 else len(verts) + k)
                for j in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[j], idx[j + 1]))
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(mesh: Mesh, path) -> None:
    # %.17g round-trips doubles exactly.
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces + 1:
            fh.write(f"f {a} {b} {c}\n")


# ------------------------------------------------------------------ normalisation


@dataclass(frozen=True)
class Transform:
    """``x -> (x + translation) * scale``."""

    translation: np.ndarray
    scale: float

    def apply_points(self, pts) -> np.ndarray:
        return (np.asarray(pts, dtype=np.float64) + self.translation) * self.scale

    def apply(self, mesh: Mesh) -> Mesh:
        return mesh.with_vertices(self.apply_points(mesh.vertices))


def normalizing_transform(mesh: Mesh) -> Transform:
    lo, hi = mesh.bounds()
    diag = float(np.linalg.norm(hi - lo))
    if not diag > 0.0:
        raise MeshError("degenerate mesh: bounding-box diagonal is zero")
    return Transform(-(lo + hi) / 2.0, 1.0 / diag)


def normalize_mesh(mesh: Mesh):
    """Centre the bounding box at the origin and scale its diagonal to 1.

    Returns ``(normalized_mesh, transform)``; the transform can be reused on a
    paired mesh so both live in the same frame.
    """
    t = normalizing_transform(mesh)
    return t.apply(mesh), t


# ----------------------------------------------------------------------- sampling


@dataclass(frozen=True, eq=False)
class SurfaceSamples:
    points: np.ndarray
    seed: int
    face_ids: np.ndarray


def sample_surface(mesh: Mesh, n: int, seed: int) -> SurfaceSamples:
    """Area-weighted uniform points on the mesh faces."""
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.face_areas() if mesh.n_faces else np.zeros(0)
    good = areas > 0.0
    if not good.any():
        raise MeshError("cannot sample: mesh has no non-degenerate face")
    if not good.all():
        log.warning("skipping %d degenerate faces while sampling", int((~good).sum()))
    rng = np.random.default_rng(seed)
    prob = np.where(good, areas, 0.0)
    prob = prob / prob.sum()
    fid = rng.choice(len(prob), size=n, p=prob)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    t = mesh.triangles[fid]
    pts = ((1.0 - r1)[:, None] * t[:, 0]
           + (r1 * (1.0 - r2))[:, None] * t[:, 1]
           + (r1 * r2)[:, None] * t[:, 2])
    return SurfaceSamples(pts, seed, fid)


# ----------------------------------------------------------------------- distance


def _kdtree_sqdist(points, tris, k=8):
    """Exact nearest-face squared distance, pruned with a centroid kd-tree.

    Each point is checked against its ``k`` nearest face centroids; the result
    is certified when no other face's bounding sphere can come closer. Points
    that fail certification fall back to the full scan.
    """
    cen = tris.mean(axis=1)
    rad = np.linalg.norm(tris - cen[:, None, :], axis=2).max(axis=1) * (1 + 1e-12)
    k = min(k, len(tris))
    dc, idx = cKDTree(cen).query(points, k=k)
    dc = dc.reshape(len(points), k)
    idx = idx.reshape(len(points), k)
    best = np.full(len(points), np.inf)
    for j in range(k):
        d = _kernels._pykernels._point_tri_sqdist(
            points[:, None, :],
            tris[idx[:, j], 0][:, None, :],
            tris[idx[:, j], 1][:, None, :],
            tris[idx[:, j], 2][:, None, :],
        )[:, 0]
        best = np.minimum(best, d)
    # Any unchecked face has centroid distance >= dc[:, -1].
    bound = np.maximum(dc[:, -1] - rad.max(), 0.0)
    todo = (bound * bound < best) & (k < len(tris))
    if todo.any():
        best[todo] = _kernels.points_triangles_sqdist(points[todo], tris)
    return best


def points_to_mesh_distance(points, mesh: Mesh, method: str = "brute") -> np.ndarray:
    """Euclidean distance from each point to the nearest point on ``mesh``.

    ``method`` is ``"brute"`` (every face, via the active kernel backend) or
    ``"kdtree"`` (centroid-tree pruning, exact). Meshes without faces fall
    back to vertex distances.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if not mesh.n_vertices:
        raise MeshError("distance to an empty mesh is undefined")
    if not mesh.n_faces:
        return cKDTree(mesh.vertices).query(pts)[0]
    tris = np.ascontiguousarray(mesh.triangles)
    if method == "brute":
        sq = _kernels.points_triangles_sqdist(pts, tris)
    elif method == "kdtree":
        sq = _kdtree_sqdist(pts, tris)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.sqrt(sq)


def point_to_mesh_distance(p, mesh: Mesh) -> float:
    return float(points_to_mesh_distance(np.asarray(p, dtype=np.float64)[None], mesh)[0])


# --------------------------------------------------------------------- voxels


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Cubic occupancy grid; ``occupancy[i, j, k]`` covers the voxel whose
    lower corner is ``origin + (i, j, k) * voxel_size``."""

    resolution: int
    origin: np.ndarray
    voxel_size: float
    occupancy: np.ndarray

    def __post_init__(self):
        r = self.resolution
        if self.occupancy.shape != (r, r, r):
            raise ValueError(f"occupancy shape {self.occupancy.shape} != {(r, r, r)}")
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def centers(self) -> np.ndarray:
        i = np.arange(self.resolution) + 0.5
        g = np.stack(np.meshgrid(i, i, i, indexing="ij"), axis=-1)
        return self.origin + g * self.voxel_size


_SIX = ndimage.generate_binary_structure(3, 1)


def voxelize(mesh: Mesh, resolution: int = 32, bounds=None) -> VoxelGrid:
    """Solid occupancy of ``mesh`` inside the box ``bounds = (lo, hi)``.

    Voxels touched by a triangle form the shell; empty voxels 6-connected to
    the grid boundary are exterior; everything else is filled.
    """
    if resolution < 4:
        raise ValueError("resolution must be >= 4")
    if bounds is None:
        bounds = padded_bounds([mesh], resolution)
    lo = np.asarray(bounds[0], dtype=np.float64)
    hi = np.asarray(bounds[1], dtype=np.float64)
    size = float((hi - lo).max()) / resolution
    if not size > 0:
        raise ValueError("bounds have zero extent")
    mlo, mhi = mesh.bounds()
    tol = 1e-9 * size
    if np.any(mlo < lo - tol) or np.any(mhi > hi + tol):
        raise MeshError("mesh exceeds voxelisation bounds")
    surface = _kernels.mark_surface_voxels(
        np.ascontiguousarray(mesh.triangles), lo, size, resolution
    )
    labels, _ = ndimage.label(~surface, structure=_SIX)
    edge = np.unique(np.concatenate([
        labels[0].ravel(), labels[-1].ravel(),
        labels[:, 0].ravel(), labels[:, -1].ravel(),
        labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
    ]))
    exterior = np.isin(labels, edge[edge > 0])
    return VoxelGrid(resolution, lo, size, ~exterior)


def padded_bounds(meshes, resolution: int, margin_voxels: float = 1.0):
    """Cubic box around all ``meshes``, centred, leaving at least
    ``margin_voxels`` empty voxels (plus half a voxel of slack) on the longest
    axis so no face lies on the grid's outer layer."""
    lo = np.min([m.bounds()[0] for m in meshes], axis=0)
    hi = np.max([m.bounds()[1] for m in meshes], axis=0)
    ext = float((hi - lo).max())
    if not ext > 0:
        raise MeshError("degenerate bounds")
    size = ext / (resolution - 2.0 * margin_voxels - 1.0)
    half = 0.5 * resolution * size
    mid = (lo + hi) / 2.0
    return mid - half, mid + half


def save_voxels(grid: VoxelGrid, path) -> None:
    """ASCII: header line, then ``resolution**3`` 0/1 characters, x fastest."""
    o = grid.origin
    bits = grid.occupancy.astype(np.uint8).ravel(order="F")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{grid.resolution} {o[0]:.17g} {o[1]:.17g} {o[2]:.17g} {grid.voxel_size:.17g}\n")
        fh.write("".join("1" if b else "0" for b in bits))
        fh.write("\n")


def load_voxels(path) -> VoxelGrid:
    with open(path, "r", encoding="ascii") as fh:
        head = fh.readline().split()
        body = "".join(fh.read().split())
    r = int(head[0])
    if len(body) != r ** 3:
        raise ValueError(f"expected {r ** 3} voxels, found {len(body)}")
    occ = (np.frombuffer(body.encode(), dtype=np.uint8) == ord("1")).reshape((r, r, r), order="F")
    return VoxelGrid(r, np.array([float(x) for x in head[1:4]]), float(head[4]), occ)
