"""Build a synthetic embedding graph from one template mesh.

Every node is the template under its own random symmetric FFD, so all nodes
share vertex count and vertex order: any pair is in dense correspondence.
"""

from __future__ import annotations

import numpy as np

from ..ffd import Deformer
from ..graph import EmbeddingGraph, GraphNode
from ..mesh import Mesh


def ring_edges(n, extra_prob=0.0, rng=None):
    """Cycle over all nodes plus each remaining pair with ``extra_prob``."""
    edges = set()
    if n > 1:
        for i in range(n):
            j = (i + 1) % n
            if i != j:
                edges.add((min(i, j), max(i, j)))
    if extra_prob > 0:
        rng = rng or np.random.default_rng(0)
        for i in range(n):
            for j in range(i + 2, n):
                if (i, j) not in edges and rng.random() < extra_prob:
                    edges.add((i, j))
    return edges


def build_synthetic_graph(base: Mesh, n_nodes, jitter=0.15, seed=0, extra_edge_prob=0.0,
                          dims=(4, 4, 4), margin=0.05, axis="x"):
    """Returns ``(graph, node_displacements)``; the displacements are the
    per-node FFD draws (std ``jitter`` times the base extent)."""
    rng = np.random.default_rng(seed)
    deformer = Deformer(base, dims, margin, axis)
    lo, hi = base.bounds()
    scale = float((hi - lo).max())
    nodes, dps = [], []
    for k in range(n_nodes):
        dp = rng.normal(0.0, jitter * scale, size=(deformer.phi.n_reduced, 3))
        dps.append(dp)
        nodes.append(GraphNode(k, deformer(dp)))
    edges = ring_edges(n_nodes, extra_edge_prob, rng)
    graph = EmbeddingGraph(nodes, frozenset(edges), tuple(dims), margin, axis)
    return graph, np.array(dps)
