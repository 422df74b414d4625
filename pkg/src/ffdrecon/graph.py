"""Shape-embedding graph: template meshes as nodes, dense-correspondence
edges, neighbourhood queries and vertex-wise linear blending."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .ffd import Deformer
from .mesh import Mesh, load_obj, save_obj

DP_SIZE = 96
DEFAULT_ZERO_TOL = 1e-3


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GraphNode:
    id: int
    mesh: Mesh
    path: str = ""


@dataclass(eq=False)
class EmbeddingGraph:
    nodes: list
    edges: frozenset  # of (i, j) with i < j
    ffd_dims: tuple = (4, 4, 4)
    ffd_margin: float = 0.05
    mirror_axis: str = "x"
    source: str = ""
    _neighbors: dict = field(default_factory=dict, init=False, repr=False)
    _deformers: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        n = len(self.nodes)
        for k, node in enumerate(self.nodes):
            if node.id != k:
                raise GraphError(f"node ids must be dense from 0; position {k} has id {node.id}")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-edge ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) references a missing node")
            vi, vj = self.nodes[i].mesh.n_vertices, self.nodes[j].mesh.n_vertices
            if vi != vj:
                raise GraphError(
                    f"edge ({i}, {j}) joins meshes with {vi} and {vj} vertices; "
                    "dense correspondence needs equal counts"
                )
            norm.add((min(i, j), max(i, j)))
        self.edges = frozenset(norm)
        nb = {k: set() for k in range(n)}
        for i, j in self.edges:
            nb[i].add(j)
            nb[j].add(i)
        self._neighbors = {k: frozenset(v) for k, v in nb.items()}

    def __len__(self):
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def mesh(self, c: int) -> Mesh:
        self._check(c)
        return self.nodes[c].mesh

    def _check(self, c):
        if not (isinstance(c, (int, np.integer)) and 0 <= c < len(self.nodes)):
            raise GraphError(f"invalid node id {c!r}")

    def deformer(self, c: int) -> Deformer:
        self._check(c)
        if c not in self._deformers:
            self._deformers[c] = Deformer(
                self.nodes[c].mesh, self.ffd_dims, self.ffd_margin, self.mirror_axis
            )
        return self._deformers[c]


def _parse_edge(tok, lineno, path):
    try:
        return int(tok[1]), int(tok[2])
    except (IndexError, ValueError):
        raise GraphError(f"{path}:{lineno}: malformed edge line") from None


def load_graph(manifest) -> EmbeddingGraph:
    """Read ``node <id> <obj-path>`` / ``edge <id> <id>`` lines.

    Relative mesh paths resolve against the manifest's directory. Optional
    ``ffd_dims``, ``ffd_margin`` and ``mirror_axis`` lines override the
    lattice settings.
    """
    base = os.path.dirname(os.path.abspath(manifest))
    node_paths = {}
    edges = []
    opts = {}
    with open(manifest, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            if tok[0] == "node":
                if len(tok) != 3:
                    raise GraphError(f"{manifest}:{lineno}: expected 'node <id> <path>'")
                nid = int(tok[1])
                if nid in node_paths:
                    raise GraphError(f"{manifest}:{lineno}: duplicate node {nid}")
                node_paths[nid] = tok[2]
            elif tok[0] == "edge":
                edges.append(_parse_edge(tok, lineno, manifest))
            elif tok[0] == "ffd_dims":
                opts["ffd_dims"] = tuple(int(x) for x in tok[1:4])
            elif tok[0] == "ffd_margin":
                opts["ffd_margin"] = float(tok[1])
            elif tok[0] == "mirror_axis":
                opts["mirror_axis"] = tok[1]
            else:
                raise GraphError(f"{manifest}:{lineno}: unknown record {tok[0]!r}")
    if sorted(node_paths) != list(range(len(node_paths))):
        raise GraphError("node ids must be dense from 0")
    nodes = []
    for nid in range(len(node_paths)):
        rel = node_paths[nid]
        full = rel if os.path.isabs(rel) else os.path.join(base, rel)
        nodes.append(GraphNode(nid, load_obj(full), rel))
    return EmbeddingGraph(nodes, frozenset(edges), source=os.path.abspath(manifest), **opts)


def save_graph(graph: EmbeddingGraph, manifest, mesh_dir="meshes") -> None:
    """Write node meshes under ``mesh_dir`` (relative to the manifest) and the
    manifest itself."""
    base = os.path.dirname(os.path.abspath(manifest))
    os.makedirs(os.path.join(base, mesh_dir), exist_ok=True)
    lines = [
        f"ffd_dims {' '.join(str(d) for d in graph.ffd_dims)}",
        f"ffd_margin {graph.ffd_margin!r}",
        f"mirror_axis {graph.mirror_axis}",
    ]
    for node in graph.nodes:
        rel = os.path.join(mesh_dir, f"node_{node.id:03d}.obj")
        save_obj(node.mesh, os.path.join(base, rel))
        lines.append(f"node {node.id} {rel}")
    for i, j in sorted(graph.edges):
        lines.append(f"edge {i} {j}")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def subgraph(graph: EmbeddingGraph, c: int) -> frozenset:
    """Neighbour ids of ``c``; never contains ``c``."""
    graph._check(c)
    return graph._neighbors[c]


def linear_combine(graph: EmbeddingGraph, c: int, base: Mesh, alpha,
                   zero_tol: float = DEFAULT_ZERO_TOL) -> Mesh:
    """``alpha[c] * base + sum(alpha[i] * V_i)`` over neighbours ``i`` of ``c``
    with ``|alpha[i]| > zero_tol``; faces come from node ``c``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (graph.n_nodes,):
        raise GraphError(f"alpha must have length {graph.n_nodes}, got {alpha.shape}")
    node = graph.mesh(c)
    if base.n_vertices != node.n_vertices:
        raise GraphError(
            f"base has {base.n_vertices} vertices, node {c} has {node.n_vertices}"
        )
    v = alpha[c] * base.vertices
    for i in sorted(subgraph(graph, c)):
        if abs(alpha[i]) <= zero_tol:
            continue
        vi = graph.nodes[i].mesh.vertices
        if len(vi) != len(v):
            raise GraphError(f"node {i} vertex count does not match node {c}")
        v = v + alpha[i] * vi
    return Mesh(v, node.faces)


@dataclass(frozen=True, eq=False)
class ShapeParams:
    """Graph index, reduced FFD displacements ``(32, 3)`` and blend weights."""

    c: int
    dp: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dp", np.asarray(self.dp, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64).ravel())

    @property
    def kappa(self) -> np.ndarray:
        """Flat regression target: displacements first, then weights."""
        return np.concatenate([self.dp.ravel(), self.alpha])

    @classmethod
    def from_kappa(cls, c, kappa, n_nodes, dp_size=DP_SIZE):
        kappa = np.asarray(kappa, dtype=np.float64).ravel()
        if len(kappa) != dp_size + n_nodes:
            raise GraphError(f"kappa length {len(kappa)} != {dp_size} + {n_nodes}")
        return cls(int(c), kappa[:dp_size], kappa[dp_size:])


def effective_alpha(graph: EmbeddingGraph, c: int, alpha, zero_tol=DEFAULT_ZERO_TOL):
    """Blend weights actually used for node ``c``.

    Entries outside ``{c}`` and its neighbours, and neighbour entries at or
    below ``zero_tol``, are zeroed. If nothing survives (``alpha[c]`` included)
    the weights fall back to ``alpha[c] = 1``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    out = np.zeros_like(alpha)
    out[c] = alpha[c]
    for i in subgraph(graph, c):
        if abs(alpha[i]) > zero_tol:
            out[i] = alpha[i]
    if not np.any(np.abs(out) > zero_tol):
        out[:] = 0.0
        out[c] = 1.0
    return out


def deform_node(graph: EmbeddingGraph, params: ShapeParams, zero_tol=DEFAULT_ZERO_TOL):
    """FFD of node ``c`` followed by the neighbourhood blend.

    This is the single code path shared by data synthesis and reconstruction.
    Returns ``(final, ffd_stage)``.
    """
    c = params.c
    deformed = graph.deformer(c)(params.dp)
    alpha = effective_alpha(graph, c, params.alpha, zero_tol)
    return linear_combine(graph, c, deformed, alpha, zero_tol), deformed
