"""Free-form deformation on a trivariate Bernstein lattice with a mirror
constraint on the control-point displacements.

Vertices are written as ``B @ (P + expand(dp))`` where ``B`` holds the
Bernstein weights of every vertex over the ``M`` control points, ``P`` the
rest lattice and ``expand`` mirrors the reduced displacements ``dp`` (half
the lattice) onto the full lattice.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .mesh import Mesh, MeshError

AXES = {"x": 0, "y": 1, "z": 2}


class FfdError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FfdGrid:
    dims: tuple
    origin: np.ndarray
    axes: np.ndarray  # rows are the lattice edge vectors
    control_points: np.ndarray  # (M, 3), x-fastest

    @property
    def n_control(self) -> int:
        return int(np.prod(self.dims))

    def flat_index(self, i, j, k) -> int:
        nx, ny, _ = self.dims
        return i + nx * (j + ny * k)


def lattice_index(dims, i, j, k) -> int:
    return i + dims[0] * (j + dims[1] * k)


def _rest_points(dims, origin, axes):
    l, m, n = (d - 1 for d in dims)
    k, j, i = np.meshgrid(np.arange(dims[2]), np.arange(dims[1]), np.arange(dims[0]),
                          indexing="ij")
    frac = np.stack([i.ravel() / l, j.ravel() / m, k.ravel() / n], axis=1)
    return origin + frac @ axes


def build_grid(mesh: Mesh, dims=(4, 4, 4), margin: float = 0.05) -> FfdGrid:
    """Axis-aligned rest lattice around the mesh bounding box, grown by
    ``margin`` (a fraction of the extent) on every side."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 2:
        raise FfdError(f"dims must be three integers >= 2, got {dims}")
    if margin < 0:
        raise FfdError("margin must be >= 0")
    lo, hi = mesh.bounds()
    ext = hi - lo
    if np.any(ext <= 0):
        raise MeshError(f"degenerate bounding box, extent {ext}")
    origin = lo - margin * ext
    axes = np.diag(ext * (1.0 + 2.0 * margin))
    return FfdGrid(dims, origin, axes, _rest_points(dims, origin, axes))


def bernstein(degree: int, index: int, t):
    """``C(d, i) t^i (1 - t)^(d - i)``; ``t`` may be an array and may leave [0, 1]."""
    if not 0 <= index <= degree:
        raise ValueError(f"index {index} outside 0..{degree}")
    t = np.asarray(t, dtype=np.float64)
    return comb(degree, index) * t ** index * (1.0 - t) ** (degree - index)


@dataclass(frozen=True, eq=False)
class DeformationMatrix:
    entries: np.ndarray  # (N, M)
    local: np.ndarray  # (N, 3) lattice coordinates of each vertex
    outside: np.ndarray  # (N,) bool, vertex outside the unit lattice cube

    @property
    def n_outside(self) -> int:
        return int(self.outside.sum())


def local_coordinates(points, grid: FfdGrid) -> np.ndarray:
    rel = np.asarray(points, dtype=np.float64) - grid.origin
    return np.stack(
        [rel @ grid.axes[a] / (grid.axes[a] @ grid.axes[a]) for a in range(3)], axis=1
    )


def build_deformation_matrix(mesh: Mesh, grid: FfdGrid) -> DeformationMatrix:
    stu = local_coordinates(mesh.vertices, grid)
    nx, ny, nz = grid.dims
    bx = np.stack([bernstein(nx - 1, i, stu[:, 0]) for i in range(nx)], axis=1)
    by = np.stack([bernstein(ny - 1, j, stu[:, 1]) for j in range(ny)], axis=1)
    bz = np.stack([bernstein(nz - 1, k, stu[:, 2]) for k in range(nz)], axis=1)
    # Column order (k, j, i) flattened == x-fastest lattice order.
    B = np.einsum("nk,nj,ni->nkji", bz, by, bx).reshape(len(stu), -1)
    eps = 1e-12
    outside = np.any((stu < -eps) | (stu > 1 + eps), axis=1)
    return DeformationMatrix(B, stu, outside)


@dataclass(frozen=True, eq=False)
class SymmetryMap:
    """Mirror expansion from reduced to full control points.

    Reduced point ``r`` drives full slot ``identity[r]`` unchanged and full
    slot ``mirror[r]`` with its mirrored-axis component negated.
    """

    dims: tuple
    axis: int
    identity: np.ndarray
    mirror: np.ndarray
    mirror_sign: np.ndarray  # (3,)

    @property
    def n_reduced(self) -> int:
        return len(self.identity)

    @property
    def n_full(self) -> int:
        return int(np.prod(self.dims))

    def pairs(self):
        """``(reduced, full, sign)`` for every slot."""
        one = np.ones(3)
        out = []
        for r in range(self.n_reduced):
            out.append((r, int(self.identity[r]), one.copy()))
            out.append((r, int(self.mirror[r]), self.mirror_sign.copy()))
        return out

    def expand(self, dp) -> np.ndarray:
        dp = np.asarray(dp, dtype=np.float64).reshape(-1, 3)
        if len(dp) != self.n_reduced:
            raise FfdError(f"expected {self.n_reduced} reduced displacements, got {len(dp)}")
        full = np.empty((self.n_full, 3))
        full[self.identity] = dp
        full[self.mirror] = dp * self.mirror_sign
        return full

    def as_matrix(self) -> np.ndarray:
        """Dense ``(3 M, 3 R)`` view acting on row-major flattened arrays."""
        phi = np.zeros((3 * self.n_full, 3 * self.n_reduced))
        for r in range(self.n_reduced):
            for c in range(3):
                phi[3 * self.identity[r] + c, 3 * r + c] = 1.0
                phi[3 * self.mirror[r] + c, 3 * r + c] = self.mirror_sign[c]
        return phi


def build_symmetry_map(dims=(4, 4, 4), axis="x") -> SymmetryMap:
    dims = tuple(int(d) for d in dims)
    a = AXES[axis] if isinstance(axis, str) else int(axis)
    if dims[a] % 2:
        raise FfdError("mirror axis needs an even number of control points")
    ident, mirr = [], []
    for k in range(dims[2]):
        for j in range(dims[1]):
            for i in range(dims[0]):
                c = [i, j, k]
                if c[a] >= dims[a] // 2:
                    continue
                m = list(c)
                m[a] = dims[a] - 1 - c[a]
                ident.append(lattice_index(dims, *c))
                mirr.append(lattice_index(dims, *m))
    sign = np.ones(3)
    sign[a] = -1.0
    return SymmetryMap(dims, a, np.array(ident), np.array(mirr), sign)


def apply_ffd(mesh: Mesh, grid: FfdGrid, B: DeformationMatrix, phi: SymmetryMap, dp) -> Mesh:
    if B.entries.shape != (mesh.n_vertices, grid.n_control):
        raise FfdError(
            f"deformation matrix {B.entries.shape} does not match mesh/grid "
            f"({mesh.n_vertices}, {grid.n_control})"
        )
    if phi.dims != grid.dims:
        raise FfdError(f"symmetry map dims {phi.dims} != grid dims {grid.dims}")
    P = grid.control_points + phi.expand(dp)
    return mesh.with_vertices(B.entries @ P)


class Deformer:
    """Grid, deformation matrix and symmetry map prepared once for a mesh."""

    def __init__(self, mesh: Mesh, dims=(4, 4, 4), margin=0.05, axis="x"):
        self.mesh = mesh
        self.grid = build_grid(mesh, dims, margin)
        self.B = build_deformation_matrix(mesh, self.grid)
        self.phi = build_symmetry_map(dims, axis)

    @property
    def n_params(self) -> int:
        return 3 * self.phi.n_reduced

    def __call__(self, dp) -> Mesh:
        return apply_ffd(self.mesh, self.grid, self.B, self.phi, dp)
