import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffdrecon.mesh import (Mesh, MeshError, ObjParseError, load_obj, load_voxels,
                           normalize_mesh, padded_bounds, point_to_mesh_distance,
                           points_to_mesh_distance, sample_surface, save_obj, save_voxels,
                           voxelize)
from ffdrecon.primitives import box_mesh, single_triangle


def write(tmp_path, text, name="m.obj"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- OBJ


def test_load_minimal(tmp_path):
    m = load_obj(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"))
    assert m.n_vertices == 3 and m.n_faces == 1


def test_load_out_of_range(tmp_path):
    with pytest.raises(MeshError):
        load_obj(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"))


def test_quad_fan(tmp_path):
    m = load_obj(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"))
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_suffixes_and_negative(tmp_path):
    m = load_obj(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/4/1 2//1 -1\n"))
    assert m.faces.tolist() == [[0, 1, 2]]


def test_parse_error_has_line(tmp_path):
    with pytest.raises(ObjParseError) as e:
        load_obj(write(tmp_path, "v 0 0 0\nv 1 zero 0\n"))
    assert e.value.lineno == 2


def test_repeated_index_rejected():
    with pytest.raises(MeshError):
        Mesh(np.eye(3), np.array([[0, 0, 1]]))


def test_roundtrip(tmp_path, unit_cube):
    save_obj(unit_cube, tmp_path / "c.obj")
    back = load_obj(tmp_path / "c.obj")
    assert np.array_equal(back.faces, unit_cube.faces)
    assert np.array_equal(back.vertices, unit_cube.vertices)


def test_roundtrip_no_faces_and_precision(tmp_path):
    m = Mesh(np.array([[0.1234567, 0, 0], [1, 2, 3]]), np.zeros((0, 3), dtype=int))
    save_obj(m, tmp_path / "v.obj")
    back = load_obj(tmp_path / "v.obj")
    assert back.n_faces == 0
    assert abs(back.vertices[0, 0] - 0.1234567) <= 1e-6


def test_save_unwritable(tmp_path, unit_cube):
    with pytest.raises(OSError):
        save_obj(unit_cube, tmp_path / "missing" / "dir" / "c.obj")


# ---------------------------------------------------------- normalisation


def test_normalize_unit_cube(unit_cube):
    n, t = normalize_mesh(unit_cube)
    lo, hi = n.bounds()
    assert np.allclose((lo + hi) / 2, 0, atol=1e-12)
    assert np.isclose(np.linalg.norm(hi - lo), 1.0)
    assert np.allclose(hi - lo, 1 / np.sqrt(3))


def test_normalize_idempotent(unit_cube):
    n, _ = normalize_mesh(unit_cube)
    n2, t2 = normalize_mesh(n)
    assert abs(t2.scale - 1) <= 1e-9 and np.abs(t2.translation).max() <= 1e-9
    assert np.abs(n2.vertices - n.vertices).max() <= 1e-9


def test_normalize_degenerate():
    m = Mesh(np.array([[1.0, 2, 3]] * 3), np.zeros((0, 3), dtype=int))
    with pytest.raises(MeshError):
        normalize_mesh(m)


# ---------------------------------------------------------------- sampling


def _inside_triangle(p, a, b, c, tol=1e-9):
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n)
    plane = np.abs((p - a) @ n) <= tol
    # barycentric via areas
    def area(x, y, z):
        return np.linalg.norm(np.cross(y - x, z - x), axis=-1)
    tot = np.linalg.norm(np.cross(b - a, c - a))
    s = area(p, b, c) + area(a, p, c) + area(a, b, p)
    return plane & (s <= tot * (1 + 1e-9))


def test_samples_inside_triangle():
    m = single_triangle((0, 0, 0), (2, 0, 1), (0, 1, 0.5))
    s = sample_surface(m, 1000, 3)
    a, b, c = m.vertices
    assert _inside_triangle(s.points, a, b, c).all()


def test_area_weighting():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 2, 0],
                  [5, 0, 0], [8, 0, 0], [5, 2, 0]], dtype=float)
    m = Mesh(v, np.array([[0, 1, 2], [3, 4, 5]]))
    assert np.allclose(m.face_areas(), [1, 3])
    s = sample_surface(m, 100_000, 0)
    frac = np.mean(s.points[:, 0] >= 5)
    assert abs(frac - 0.75) <= 0.01


def test_sampling_deterministic(unit_cube):
    a = sample_surface(unit_cube, 500, 9).points
    b = sample_surface(unit_cube, 500, 9).points
    assert np.array_equal(a, b)


def test_sampling_degenerate():
    m = Mesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        sample_surface(m, 10, 0)


def test_sampling_skips_degenerate_with_warning(caplog):
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]], float)
    m = Mesh(v, np.array([[0, 1, 2], [0, 1, 3]]))
    s = sample_surface(m, 50, 0)
    assert np.all(s.face_ids == 0)
    assert "degenerate" in caplog.text


# ---------------------------------------------------------------- distance


def test_distance_on_face_and_above():
    m = single_triangle()
    assert point_to_mesh_distance([0.2, 0.2, 0.0], m) == 0.0
    assert point_to_mesh_distance([0.0, 0.0, 2.0], m) == 2.0


def _oracle_point_triangle(p, a, b, c, n=None):
    """Minimise over a dense set of candidates: the plane projection if it
    lies inside, else the closest point on each edge segment."""
    best = np.inf
    nrm = np.cross(b - a, c - a)
    nrm = nrm / np.linalg.norm(nrm)
    q = p - ((p - a) @ nrm) * nrm
    # barycentric of q by solving least squares
    M = np.stack([b - a, c - a], axis=1)
    uv, *_ = np.linalg.lstsq(M, q - a, rcond=None)
    if uv.min() >= 0 and uv.sum() <= 1:
        best = np.linalg.norm(p - q)
    for s, e in ((a, b), (b, c), (c, a)):
        d = e - s
        t = np.clip((p - s) @ d / (d @ d), 0, 1)
        best = min(best, np.linalg.norm(p - (s + t * d)))
    return best


def test_distance_matches_oracle(rng):
    m = box_mesh(2, size=(1.0, 0.7, 0.4), center=(0.1, 0.2, -0.3))
    v = m.vertices + rng.normal(0, 0.05, m.vertices.shape)
    m = m.with_vertices(v)
    pts = rng.normal(0, 1.0, (60, 3))
    got = points_to_mesh_distance(pts, m)
    tris = m.triangles
    want = [min(_oracle_point_triangle(p, *t) for t in tris) for p in pts]
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_kdtree_matches_brute(rng):
    m = box_mesh(2)
    m = m.with_vertices(m.vertices + rng.normal(0, 0.03, m.vertices.shape))
    # 2x2 per side -> 48 faces; also a 20-face mesh
    small = Mesh(m.vertices, m.faces[:20])
    for mesh in (m, small):
        pts = rng.uniform(-1, 2, (100, 3))
        a = points_to_mesh_distance(pts, mesh, "brute")
        b = points_to_mesh_distance(pts, mesh, "kdtree")
        assert np.abs(a - b).max() <= 1e-9


def test_vertices_have_zero_distance(unit_cube):
    assert np.all(points_to_mesh_distance(unit_cube.vertices, unit_cube) == 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_distance_is_lipschitz(xs):
    m = box_mesh(1)
    p, q = np.array(xs[:3]), np.array(xs[3:])
    dp, dq = points_to_mesh_distance(np.stack([p, q]), m)
    assert abs(dp - dq) <= np.linalg.norm(p - q) + 1e-12


# -------------------------------------------------------------- voxelising


def _parity_inside(points, mesh):
    """Count crossings of a skewed ray with every triangle (Moller-Trumbore)."""
    d = np.array([0.5773, 0.5213, 0.6285])
    d /= np.linalg.norm(d)
    tri = mesh.triangles
    a, e1, e2 = tri[:, 0], tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    inside = np.zeros(len(points), dtype=bool)
    for k, p in enumerate(points):
        h = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, h)
        ok = np.abs(det) > 1e-14
        f = np.where(ok, 1.0 / np.where(ok, det, 1), 0)
        s = p - a
        u = f * np.einsum("ij,ij->i", s, h)
        q = np.cross(s, e1)
        v = f * (q @ d)
        t = f * np.einsum("ij,ij->i", e2, q)
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        inside[k] = hit.sum() % 2 == 1
    return inside


def _box_touches_cube(lo, hi, tol=1e-9):
    """Closed voxel box [lo, hi] meets the surface of the unit cube."""
    meets_solid = np.all((hi >= -tol) & (lo <= 1 + tol), axis=1)
    strictly_inside = np.all((lo > tol) & (hi < 1 - tol), axis=1)
    return meets_solid & ~strictly_inside


def test_unit_cube_voxels_against_parity(unit_cube):
    r = 32
    v = 1.0 / 30
    g = voxelize(unit_cube, r, (np.full(3, -v), np.full(3, 1 + v)))
    centers = g.centers().reshape(-1, 3)
    occ = g.occupancy.reshape(-1)
    inside = _parity_inside(centers, unit_cube)
    assert inside.sum() == 30 ** 3
    assert occ[inside].all()
    assert g.occupancy[r // 2, r // 2, r // 2]
    extra = occ & ~inside
    lo = centers[extra] - v / 2
    assert _box_touches_cube(lo, lo + v).all()
    assert g.count == 30 ** 3 + extra.sum()


def test_open_triangle_voxels():
    m = single_triangle((0.1, 0.1, 0.5), (0.9, 0.1, 0.5), (0.1, 0.9, 0.5))
    g = voxelize(m, 16, padded_bounds([single_triangle((0, 0, 0), (1, 0, 0), (0, 1, 1))], 16))
    from ffdrecon import _kernels
    shell = _kernels.mark_surface_voxels(np.ascontiguousarray(m.triangles), g.origin,
                                         g.voxel_size, 16)
    assert np.array_equal(g.occupancy, shell)
    assert 0 < g.count < 16 ** 3 // 4


def test_voxelize_pure(unit_cube):
    a = voxelize(unit_cube, 16)
    b = voxelize(unit_cube, 16)
    assert np.array_equal(a.occupancy, b.occupancy)


def test_voxelize_out_of_bounds(unit_cube):
    with pytest.raises(MeshError):
        voxelize(unit_cube, 16, (np.zeros(3), np.full(3, 0.5)))


def test_resolution_consistency(unit_cube):
    bounds = padded_bounds([unit_cube], 16)
    f16 = voxelize(unit_cube, 16, bounds).count / 16 ** 3
    f32 = voxelize(unit_cube, 32, bounds).count / 32 ** 3
    assert abs(f16 - f32) <= 0.1 * f32


def test_conservative_shell_overestimates_and_converges():
    m = box_mesh(6, size=(0.6, 0.5, 1.2), center=(0, 0, 0))
    true = 0.6 * 0.5 * 1.2
    vols = [voxelize(m, r, padded_bounds([m], r)) for r in (16, 32, 64)]
    vols = [g.count * g.voxel_size ** 3 for g in vols]
    assert all(v >= true for v in vols)
    assert vols[0] > vols[1] > vols[2]


def test_voxel_export_roundtrip(tmp_path, unit_cube):
    g = voxelize(unit_cube, 8)
    save_voxels(g, tmp_path / "v.txt")
    text = (tmp_path / "v.txt").read_text().split("\n")
    assert len(text[1]) == 8 ** 3
    # x fastest: the second character is voxel (1, 0, 0)
    assert text[1][1] == "01"[int(g.occupancy[1, 0, 0])]
    back = load_voxels(tmp_path / "v.txt")
    assert np.array_equal(back.occupancy, g.occupancy)
    assert back.voxel_size == g.voxel_size and np.array_equal(back.origin, g.origin)
