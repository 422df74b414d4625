import numpy as np
import pytest

from ffdrecon.graph import EmbeddingGraph, GraphNode
from ffdrecon.mesh import Mesh
from ffdrecon.primitives import box_mesh


@pytest.fixture
def unit_cube():
    return box_mesh(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_graph(n_nodes, n_vertices=12, edge_prob=0.5, seed=0):
    """Nodes share one face list; vertex positions are independent noise."""
    r = np.random.default_rng(seed)
    faces = np.array([[i, (i + 1) % n_vertices, (i + 2) % n_vertices] for i in range(n_vertices)])
    nodes = [GraphNode(k, Mesh(r.normal(size=(n_vertices, 3)), faces)) for k in range(n_nodes)]
    edges = {(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes) if r.random() < edge_prob}
    return EmbeddingGraph(nodes, frozenset(edges))


def toy_graph(n_nodes=5, jitter=0.1, seed=0):
    """Small ring graph over a subdivided box, centred at the origin."""
    from ffdrecon.synth import build_synthetic_graph
    base = box_mesh(2, size=(0.6, 0.5, 1.2), center=(0, 0, 0))
    return build_synthetic_graph(base, n_nodes, jitter=jitter, seed=seed)[0]
