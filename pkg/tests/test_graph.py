import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffdrecon.graph import (EmbeddingGraph, GraphError, GraphNode, ShapeParams, deform_node,
                            effective_alpha, linear_combine, load_graph, save_graph, subgraph)
from ffdrecon.mesh import Mesh, save_obj
from ffdrecon.primitives import box_mesh

from conftest import random_graph


def _manifest(tmp_path, counts, edges):
    lines = []
    for k, n in enumerate(counts):
        v = np.arange(3 * n, dtype=float).reshape(n, 3) ** 0.5
        save_obj(Mesh(v, np.array([[0, 1, 2]])), tmp_path / f"n{k}.obj")
        lines.append(f"node {k} n{k}.obj")
    lines += [f"edge {i} {j}" for i, j in edges]
    p = tmp_path / "graph.txt"
    p.write_text("\n".join(lines) + "\n")
    return p


def test_load_valid(tmp_path):
    g = load_graph(_manifest(tmp_path, [10, 10, 10], [(0, 1), (1, 2)]))
    assert g.n_nodes == 3 and g.edges == {(0, 1), (1, 2)}


def test_load_mismatched_counts(tmp_path):
    with pytest.raises(GraphError, match=r"\(0, 1\)"):
        load_graph(_manifest(tmp_path, [100, 120], [(0, 1)]))


def test_load_duplicate_edge(tmp_path):
    g = load_graph(_manifest(tmp_path, [5, 5], [(0, 1), (1, 0)]))
    assert g.edges == {(0, 1)}


def test_self_edge_and_missing_node(tmp_path):
    with pytest.raises(GraphError):
        load_graph(_manifest(tmp_path, [5, 5], [(1, 1)]))
    with pytest.raises(GraphError):
        load_graph(_manifest(tmp_path, [5, 5], [(0, 4)]))


def test_save_load_roundtrip(tmp_path):
    g = random_graph(4, seed=3)
    save_graph(g, tmp_path / "g" / "graph.txt")
    back = load_graph(tmp_path / "g" / "graph.txt")
    assert back.edges == g.edges
    for a, b in zip(g.nodes, back.nodes):
        assert np.array_equal(a.mesh.vertices, b.mesh.vertices)


def _star(n_nodes, centre, leaves):
    r = np.random.default_rng(0)
    faces = np.array([[0, 1, 2], [1, 2, 3]])
    nodes = [GraphNode(k, Mesh(r.normal(size=(4, 3)), faces)) for k in range(n_nodes)]
    return EmbeddingGraph(nodes, frozenset((centre, j) for j in leaves))


def test_subgraph_counts():
    g = _star(8, 1, [3, 4, 5, 6, 7])
    assert subgraph(g, 1) == {3, 4, 5, 6, 7}
    assert len(subgraph(g, 1)) == 5
    assert subgraph(g, 0) == frozenset()
    assert subgraph(g, 5) == {1}
    with pytest.raises(GraphError):
        subgraph(g, 8)


def test_identity_combination():
    g = random_graph(5, seed=1)
    base = g.mesh(2).with_vertices(g.mesh(2).vertices + 0.5)
    alpha = np.zeros(5)
    alpha[2] = 1.0
    out = linear_combine(g, 2, base, alpha)
    assert np.array_equal(out.vertices, base.vertices)


def test_convexity_on_identical_meshes():
    m = box_mesh(1)
    g = EmbeddingGraph([GraphNode(0, m), GraphNode(1, m)], frozenset({(0, 1)}))
    out = linear_combine(g, 0, m, np.array([0.5, 0.5]))
    assert np.allclose(out.vertices, m.vertices, atol=1e-15)


def test_path_graph_dense_oracle(rng):
    g = random_graph(3, seed=5, edge_prob=0.0)
    g = EmbeddingGraph(g.nodes, frozenset({(0, 1), (1, 2)}))
    alpha = rng.normal(size=3)
    out = linear_combine(g, 1, g.mesh(1), alpha, zero_tol=0.0)
    want = np.zeros_like(out.vertices)
    for k in range(3):
        for v in range(len(want)):
            for d in range(3):
                want[v, d] += alpha[k] * g.nodes[k].mesh.vertices[v, d]
    assert np.abs(out.vertices - want).max() <= 1e-12


def test_vertex_mismatch_base():
    g = random_graph(3)
    with pytest.raises(GraphError):
        linear_combine(g, 0, box_mesh(1), np.ones(3))


def _dense_oracle(g, c, base, alpha, tol):
    """Sum over an explicit 0/1 participation mask with a dense matrix."""
    n = g.n_nodes
    mask = np.zeros(n)
    for i in range(n):
        if i in subgraph(g, c) and abs(alpha[i]) > tol:
            mask[i] = 1.0
    stack = np.stack([g.nodes[i].mesh.vertices for i in range(n)])  # (n, V, 3)
    return alpha[c] * base.vertices + np.tensordot(mask * alpha, stack, axes=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 10), st.integers(0, 10 ** 6), st.floats(0, 0.5))
def test_against_dense_oracle(n, seed, tol):
    g = random_graph(n, n_vertices=9, seed=seed)
    r = np.random.default_rng(seed + 1)
    c = int(r.integers(n))
    alpha = r.normal(size=n) * (r.random(n) < 0.6)
    base = g.mesh(c).with_vertices(g.mesh(c).vertices + r.normal(size=(9, 3)))
    out = linear_combine(g, c, base, alpha, tol)
    assert np.abs(out.vertices - _dense_oracle(g, c, base, alpha, tol)).max() <= 1e-9
    assert out.faces.tobytes() == g.mesh(c).faces.tobytes()


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 10), st.integers(0, 10 ** 6))
def test_linearity_in_alpha(n, seed):
    g = random_graph(n, n_vertices=9, seed=seed)
    r = np.random.default_rng(seed)
    c = int(r.integers(n))
    a, b = r.normal(size=n), r.normal(size=n)
    base = g.mesh(c)
    ab = linear_combine(g, c, base, a + b, 0.0).vertices
    sa = linear_combine(g, c, base, a, 0.0).vertices + linear_combine(g, c, base, b, 0.0).vertices
    assert np.abs(ab - sa).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 10), st.integers(0, 10 ** 6))
def test_sparsification_equals_zero_weight(n, seed):
    g = random_graph(n, n_vertices=9, seed=seed)
    r = np.random.default_rng(seed)
    c = int(r.integers(n))
    alpha = r.normal(size=n)
    small = r.random(n) < 0.5
    alpha[small] = r.uniform(-1e-3, 1e-3, size=small.sum())
    zeroed = np.where(np.abs(alpha) <= 1e-3, 0.0, alpha)
    zeroed[c] = alpha[c]
    a = linear_combine(g, c, g.mesh(c), alpha, 1e-3).vertices
    b = linear_combine(g, c, g.mesh(c), zeroed, 0.0).vertices
    assert np.abs(a - b).max() <= 1e-12


def test_effective_alpha_fallback():
    g = random_graph(4, seed=2, edge_prob=1.0)
    out = effective_alpha(g, 1, np.full(4, 1e-4))
    assert out.tolist() == [0, 1, 0, 0]
    out = effective_alpha(g, 1, np.array([0.3, 0.0, 0.0, 0.0]))
    assert out.tolist() == [0.3, 0.0, 0.0, 0.0]


def test_deform_node_identity():
    m = box_mesh(2)
    g = EmbeddingGraph([GraphNode(0, m), GraphNode(1, m)], frozenset({(0, 1)}))
    p = ShapeParams(0, np.zeros((32, 3)), np.array([1.0, 0.0]))
    final, ffd = deform_node(g, p)
    assert np.abs(final.vertices - m.vertices).max() <= 1e-9
    assert final.n_vertices == m.n_vertices


def test_kappa_layout():
    p = ShapeParams(2, np.arange(96.0), np.array([7.0, 8.0, 9.0]))
    assert p.kappa[:96].tolist() == list(range(96))
    assert p.kappa[96:].tolist() == [7, 8, 9]
    q = ShapeParams.from_kappa(2, p.kappa, 3)
    assert np.array_equal(q.dp, p.dp) and np.array_equal(q.alpha, p.alpha)
    with pytest.raises(GraphError):
        ShapeParams.from_kappa(0, p.kappa, 4)
