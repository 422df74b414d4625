"""Synthetic training data: deformed graph models, their parameters and
rendered views, plus the dataset manifest format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..graph import DEFAULT_ZERO_TOL, DP_SIZE, EmbeddingGraph, ShapeParams, deform_node, subgraph
from ..mesh import Mesh, save_obj
from .priors import AlphaPrior, GaussianMixture, sample_alpha, sample_gmm
from .render import RENDER_HEIGHT, RENDER_WIDTH, Camera, render, save_pgm

MANIFEST_MAGIC = "# ffdrecon dataset v1"
TRAIN_FRACTION = 0.7


def synthesize_model(graph: EmbeddingGraph, c, dp, alpha, zero_tol=DEFAULT_ZERO_TOL) -> Mesh:
    """Deform node ``c`` by ``dp`` then blend with ``alpha``; same code path as
    reconstruction."""
    return deform_node(graph, ShapeParams(c, dp, alpha), zero_tol)[0]


@dataclass(frozen=True)
class CameraRanges:
    azimuth: tuple = (0.0, 2 * np.pi)
    elevation: tuple = (0.0, np.pi / 6)
    fill: tuple = (0.6, 0.8)
    fov: float = np.pi / 4

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self):
        return {"azimuth": list(self.azimuth), "elevation": list(self.elevation),
                "fill": list(self.fill), "fov": self.fov}


def graph_radius(graph: EmbeddingGraph) -> float:
    """Largest vertex distance from the origin over all node meshes."""
    return max(float(np.linalg.norm(n.mesh.vertices, axis=1).max()) for n in graph.nodes)


def sample_camera(ranges: CameraRanges, radius, rng) -> Camera:
    """Orbit camera aimed at the origin. The distance makes a sphere of
    ``radius`` span a ``fill`` fraction of the frame height, so a larger
    model looks larger."""
    az = rng.uniform(*ranges.azimuth)
    el = rng.uniform(*ranges.elevation)
    fill = rng.uniform(*ranges.fill)
    dist = radius / (fill * np.tan(0.5 * ranges.fov))
    return Camera(float(az), float(el), float(dist), float(ranges.fov))


@dataclass
class DatasetRecord:
    image: str
    label: int
    dp: np.ndarray
    alpha: np.ndarray
    mesh: str
    camera: Camera

    @property
    def params(self) -> ShapeParams:
        return ShapeParams(self.label, self.dp, self.alpha)

    @property
    def kappa(self) -> np.ndarray:
        return self.params.kappa


@dataclass
class Dataset:
    root: str
    graph_path: str
    records: list
    train: range
    test: range
    n_nodes: int
    meta: dict = field(default_factory=dict)

    def path(self, rel) -> str:
        return rel if os.path.isabs(rel) else os.path.join(self.root, rel)

    def split(self, name):
        return [self.records[i] for i in (self.train if name == "train" else self.test)]


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_manifest(ds: Dataset, path) -> None:
    lines = [MANIFEST_MAGIC, f"graph {ds.graph_path}", f"nodes {ds.n_nodes}",
             f"count {len(ds.records)}",
             f"split train {ds.train.start} {ds.train.stop}",
             f"split test {ds.test.start} {ds.test.stop}"]
    for k in sorted(ds.meta):
        lines.append(f"meta {k} {ds.meta[k]}")
    for r in ds.records:
        fields = [r.image, str(r.label), *map(_fmt, r.dp.ravel()), *map(_fmt, r.alpha),
                  r.mesh, *map(_fmt, r.camera.to_list())]
        lines.append("record " + " ".join(fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    root = os.path.dirname(os.path.abspath(path))
    graph_path, n_nodes = "", 0
    splits, meta, records = {}, {}, []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != MANIFEST_MAGIC:
            raise ValueError(f"{path}: not a dataset manifest")
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "graph":
                parts = line.split(None, 1)
                graph_path = parts[1].strip() if len(parts) > 1 else ""
            elif tok[0] == "nodes":
                n_nodes = int(tok[1])
            elif tok[0] == "split":
                splits[tok[1]] = range(int(tok[2]), int(tok[3]))
            elif tok[0] == "meta":
                meta[tok[1]] = " ".join(tok[2:])
            elif tok[0] == "record":
                vals = tok[1:]
                dp = np.array(vals[2:2 + DP_SIZE], dtype=np.float64)
                a0 = 2 + DP_SIZE
                alpha = np.array(vals[a0:a0 + n_nodes], dtype=np.float64)
                records.append(DatasetRecord(vals[0], int(vals[1]), dp.reshape(-1, 3), alpha,
                                             vals[a0 + n_nodes],
                                             Camera.from_list(vals[a0 + n_nodes + 1:])))
    return Dataset(root, graph_path, records, splits.get("train", range(0)),
                   splits.get("test", range(0)), n_nodes, meta)


def record_rng(seed, index) -> np.random.Generator:
    """Independent stream per record, so generation order never matters."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def make_record(graph: EmbeddingGraph, index, gmm: GaussianMixture, prior: AlphaPrior,
                cameras: CameraRanges, seed, sparsity=0.5, radius=None,
                zero_tol=DEFAULT_ZERO_TOL):
    """Parameters, ground-truth mesh and rendered view for record ``index``."""
    rng = record_rng(seed, index)
    c = int(rng.integers(graph.n_nodes))
    dp = sample_gmm(gmm, rng)
    alpha = sample_alpha(prior, c, subgraph(graph, c), graph.n_nodes, sparsity, rng)
    radius = graph_radius(graph) if radius is None else radius
    cam = sample_camera(cameras, radius, rng)
    mesh = synthesize_model(graph, c, dp, alpha, zero_tol)
    return c, dp, alpha, cam, mesh, render(mesh, cam, RENDER_WIDTH, RENDER_HEIGHT)


def generate_dataset(graph: EmbeddingGraph, count, gmm: GaussianMixture, prior: AlphaPrior,
                     cameras: CameraRanges | None = None, seed=0, out_dir="dataset",
                     sparsity=0.5, zero_tol=DEFAULT_ZERO_TOL, graph_path=None,
                     train_fraction=TRAIN_FRACTION) -> str:
    """Write ``count`` records (image, ground-truth mesh, parameters) and a
    manifest under ``out_dir``; returns the manifest path.

    The first ``train_fraction`` of records (70 % by default) form the
    training split.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1], got {train_fraction}")
    if gmm.dim != DP_SIZE:
        raise ValueError(f"displacement prior must be {DP_SIZE}-dimensional, got {gmm.dim}")
    cameras = cameras or CameraRanges()
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "meshes"), exist_ok=True)
    radius = graph_radius(graph)
    records = []
    for i in range(count):
        c, dp, alpha, cam, mesh, img = make_record(graph, i, gmm, prior, cameras, seed,
                                                   sparsity, radius, zero_tol)
        img_rel = os.path.join("images", f"{i:06d}.pgm")
        mesh_rel = os.path.join("meshes", f"{i:06d}.obj")
        save_pgm(img, os.path.join(out_dir, img_rel))
        save_obj(mesh, os.path.join(out_dir, mesh_rel))
        records.append(DatasetRecord(img_rel, c, np.asarray(dp).reshape(-1, 3), alpha,
                                     mesh_rel, cam))
    n_train = int(round(train_fraction * count))
    gpath = graph_path if graph_path is not None else graph.source
    if gpath and os.path.isabs(gpath):
        gpath = os.path.relpath(gpath, os.path.abspath(out_dir))
    ds = Dataset(os.path.abspath(out_dir), gpath, records, range(0, n_train),
                 range(n_train, count), graph.n_nodes,
                 {"seed": seed, "sparsity": _fmt(sparsity), "zero_tol": _fmt(zero_tol)})
    manifest = os.path.join(out_dir, "dataset.txt")
    write_manifest(ds, manifest)
    return manifest
