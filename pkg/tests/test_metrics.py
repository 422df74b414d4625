import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffdrecon.mesh import Mesh, MeshError, padded_bounds
from ffdrecon.metrics import (COLUMNS, assemble_report, classification_metrics, params_mse,
                              surface_distance, voxel_iou)
from ffdrecon.primitives import box_mesh


def _shift(m, d):
    return m.with_vertices(m.vertices + np.asarray(d, dtype=float))


def test_self_distance(unit_cube):
    assert surface_distance(unit_cube, unit_cube) <= 1e-6
    sph = box_mesh(4, center=(0.2, -1, 3))
    assert surface_distance(sph, sph, n_samples=5000, seed=4) <= 1e-6


def test_distance_symmetry(unit_cube):
    other = _shift(unit_cube, (0.1, 0.05, 0))
    a = surface_distance(unit_cube, other, n_samples=30_000, seed=7)
    b = surface_distance(other, unit_cube, n_samples=30_000, seed=7)
    assert abs(a - b) <= 1e-3


def _cube_surface_samples(n, rng, lo):
    """Uniform points on the surface of the unit cube with corner ``lo``."""
    face = rng.integers(6, size=n)
    uv = rng.random((n, 2))
    pts = np.empty((n, 3))
    axis = face % 3
    side = (face // 3).astype(float)
    for a in range(3):
        sel = axis == a
        others = [k for k in range(3) if k != a]
        pts[sel, a] = side[sel]
        pts[sel, others[0]] = uv[sel, 0]
        pts[sel, others[1]] = uv[sel, 1]
    return pts + lo


def _box_surface_distance(p, lo, hi):
    """Exact distance from points to the surface of the box [lo, hi]."""
    out = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    outside = np.linalg.norm(out, axis=1)
    inside = np.minimum(p - lo, hi - p).min(axis=1)
    return np.where(np.any(out > 0, axis=1), outside, np.maximum(inside, 0.0))


def test_translated_cube_vs_brute_force(unit_cube):
    shifted = _shift(unit_cube, (0.1, 0, 0))
    rng = np.random.default_rng(99)
    n = 1_000_000
    a_lo, b_lo = np.zeros(3), np.array([0.1, 0, 0])
    pa = _cube_surface_samples(n, rng, a_lo)
    pb = _cube_surface_samples(n, rng, b_lo)
    # gt is the unit cube: diagonal sqrt(3) becomes 1
    oracle = (_box_surface_distance(pa, b_lo, b_lo + 1).mean()
              + _box_surface_distance(pb, a_lo, a_lo + 1).mean()) / np.sqrt(3)
    got = surface_distance(shifted, unit_cube)
    assert abs(got - oracle) <= 0.02 * oracle


def test_distance_scale_invariant(unit_cube):
    other = _shift(box_mesh(2, size=(1, 0.8, 1.2)), (0.1, 0, 0.05))
    a = surface_distance(other, unit_cube, n_samples=5000, seed=1)
    s = 3.7
    b = surface_distance(other.with_vertices(other.vertices * s),
                         unit_cube.with_vertices(unit_cube.vertices * s), n_samples=5000, seed=1)
    assert abs(a - b) <= 1e-9


def test_distance_vertex_mode(unit_cube):
    assert surface_distance(unit_cube, unit_cube, use_vertices=True) == 0.0
    d = surface_distance(_shift(unit_cube, (0.2, 0, 0)), unit_cube, use_vertices=True)
    # every vertex of either cube sits 0.2 from the other's x faces or on a face
    assert 0 < d <= 2 * 0.2 / np.sqrt(3) + 1e-12


def test_distance_degenerate_gt():
    flat = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        surface_distance(box_mesh(1), flat)


def test_iou_identical_and_disjoint(unit_cube):
    assert voxel_iou(unit_cube, unit_cube) == 1.0
    assert voxel_iou(unit_cube, _shift(unit_cube, (3, 3, 3))) == 0.0


def _shell_bounds(shift, h):
    """IoU range when each box gains or loses one voxel layer per face."""
    def iou(grow):
        e = 1 + 2 * grow
        inter = (1 - shift + 2 * grow) * e * e
        return inter / (2 * e ** 3 - inter)
    return iou(-h), iou(h)


def test_iou_half_shift(unit_cube):
    res = 33
    other = _shift(unit_cube, (0.5, 0, 0))
    lo, hi = padded_bounds([unit_cube, other], res)
    h = (hi - lo).max() / res
    assert abs(0.5 / h - round(0.5 / h)) < 1e-9  # shift is a whole number of voxels
    got = voxel_iou(unit_cube, other, res)
    low, high = _shell_bounds(0.5, h)
    assert low <= 1 / 3 <= high
    assert low <= got <= high


def test_iou_open_surface_errors():
    with pytest.raises(MeshError):
        voxel_iou(Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]])),
                  Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]])))


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_iou_range_and_symmetry(dx, dy):
    a = box_mesh(1)
    b = _shift(box_mesh(1, size=(0.7, 1, 0.9)), (dx, dy, 0))
    v = voxel_iou(a, b, 16)
    assert 0.0 <= v <= 1.0
    assert v == voxel_iou(b, a, 16)


def test_classification_examples():
    assert classification_metrics([0, 1, 2], [0, 1, 2], 3) == {
        "accuracy": 100.0, "precision": 100.0, "recall": 100.0}
    m = classification_metrics([0, 0, 0, 0], [0, 0, 1, 1], 2)
    assert m == {"accuracy": 50.0, "precision": 25.0, "recall": 50.0}
    assert classification_metrics([1], [1], 4) == {
        "accuracy": 100.0, "precision": 100.0, "recall": 100.0}
    with pytest.raises(ValueError):
        classification_metrics([0, 5], [0, 1], 3)
    with pytest.raises(ValueError):
        classification_metrics([0], [0, 1], 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40),
       st.permutations(range(5)))
def test_accuracy_relabel_invariant(pairs, perm):
    p, t = zip(*pairs)
    perm = np.array(perm)
    a = classification_metrics(p, t, 5)
    b = classification_metrics(perm[list(p)], perm[list(t)], 5)
    assert a == pytest.approx(b)


def test_params_mse(rng):
    a = rng.normal(size=20)
    assert params_mse(a, a) == 0.0
    assert params_mse(a + 0.1, a) == pytest.approx(0.01, abs=1e-12)
    b = rng.normal(size=20)
    want = 0.0
    for x, y in zip(a, b):
        want += (x - y) ** 2
    assert params_mse(a, b) == pytest.approx(want / 20, rel=1e-12)
    with pytest.raises(ValueError):
        params_mse(a, b[:5])


def _row(acc):
    return {"cae_mse": 0.1, "accuracy": acc, "precision": 50.0, "recall": 40.0,
            "params_mse": 0.01, "dist3d": 0.2, "iou": 0.5}


def test_report():
    one = assemble_report({"chair": _row(70)})
    assert one.mean == one.rows["chair"]
    two = assemble_report({"chair": _row(80), "table": _row(90)})
    assert two.mean["accuracy"] == 85.0
    assert [h for _, h in COLUMNS] == ["MSE", "Acc", "Prec", "Rec", "MSE", "dist3D", "IoU"]
    table = two.table()
    assert "3D Model Selection" in table and "85.00" in table
    assert two.to_kv().splitlines()[-1].startswith("mean ")
    with pytest.raises(ValueError):
        assemble_report({})
    with pytest.raises(ValueError):
        assemble_report({"x": _row(120)})


def test_translated_cube_closed_form(unit_cube):
    # per cube: x faces give 0.1 and E[min(0.1, edge distance)] = (1 - 0.8**3) / 6,
    # the four side faces give 0.1 * 0.05 each; average over six faces, both
    # directions, then scale by 1 / sqrt(3)
    per_cube = (0.1 + (1 - 0.8 ** 3) / 6 + 4 * 0.005) / 6
    want = 2 * per_cube / np.sqrt(3)
    got = surface_distance(_shift(unit_cube, (0.1, 0, 0)), unit_cube, n_samples=300_000, seed=2)
    assert abs(got - want) <= 0.005 * want
