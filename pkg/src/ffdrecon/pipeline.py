"""Training workflow, single-image reconstruction and evaluation harness."""

from __future__ import annotations

import copy
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import metrics as M
from .graph import (DEFAULT_ZERO_TOL, DP_SIZE, EmbeddingGraph, GraphError, ShapeParams,
                    deform_node, load_graph)
from .mesh import Mesh, load_obj
from .nn import (Network, TrainConfig, batched, build_cae, build_classifier, build_regressor,
                 load_checkpoint, save_checkpoint, train)
from .nn.train import TrainingDiverged
from .synth import (AlphaPrior, CameraRanges, GaussianMixture, fit_gmm, generate_dataset,
                    load_dataset, load_pgm, resize_to_input, to_network_input)
from .synth.dataset import TRAIN_FRACTION
from .synth.render import INPUT_SIZE

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage, msg):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


DEFAULT_CONFIG = {
    "graph": "graph/graph.txt",
    "output": "run",
    "seed": 0,
    "dtype": "float32",
    "class_name": "synthetic",
    "dataset": {
        "count": 400,
        "train_fraction": TRAIN_FRACTION,
        "sparsity": 0.5,
        "cameras": {},
        "gmm": {"std": 0.03},
        "alpha_prior": {"mean": 0.5, "std": 0.1},
    },
    "cae": {"lr": 1e-3, "weight_decay": 1e-5, "epochs": 100, "batch_size": 32},
    "heads": {"lr": 1e-3, "weight_decay": 0.0, "epochs": 1000, "batch_size": 32},
    "metrics": {"samples": M.DEFAULT_SAMPLES, "resolution": M.DEFAULT_RESOLUTION,
                "zero_tol": DEFAULT_ZERO_TOL},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class PipelineConfig:
    data: dict
    base_dir: str = "."

    @classmethod
    def load(cls, path, overrides=None):
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(_merge(_merge(DEFAULT_CONFIG, raw), overrides),
                   os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, d=None, base_dir=".", overrides=None):
        return cls(_merge(_merge(DEFAULT_CONFIG, d), overrides), os.path.abspath(base_dir))

    def __getitem__(self, key):
        return self.data[key]

    def path(self, rel) -> str:
        return rel if os.path.isabs(rel) else os.path.join(self.base_dir, rel)

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def output(self) -> str:
        return self.path(self.data["output"])

    @property
    def dataset_manifest(self) -> str:
        return os.path.join(self.output, "dataset", "dataset.txt")

    @property
    def bundle_dir(self) -> str:
        return os.path.join(self.output, "bundle")

    def train_config(self, section, seed_offset) -> TrainConfig:
        s = self.data[section]
        return TrainConfig(lr=float(s["lr"]), weight_decay=float(s["weight_decay"]),
                           epochs=int(s["epochs"]), batch_size=int(s["batch_size"]),
                           seed=self.seed * 1000 + seed_offset)

    def validate(self):
        if not os.path.exists(self.path(self.data["graph"])):
            raise PipelineError("config", f"graph manifest not found: {self.data['graph']}")
        for section in ("cae", "heads"):
            s = self.data[section]
            if s["lr"] <= 0 or s["epochs"] < 0 or s["batch_size"] < 1:
                raise PipelineError("config", f"{section}: lr/batch must be positive")
        m = self.data["metrics"]
        if m["samples"] < 1 or m["resolution"] < 4 or m["zero_tol"] < 0:
            raise PipelineError("config", "metrics parameters out of range")


def displacement_prior(spec: dict, base_dir=".", seed=0) -> GaussianMixture:
    """Mixture from ``{"samples": file, "k", "iters"}``, explicit
    ``{"weights", "means", "variances"}``, or isotropic ``{"std", "mean"}``."""
    if "samples" in spec:
        path = spec["samples"]
        path = path if os.path.isabs(path) else os.path.join(base_dir, path)
        x = np.loadtxt(path, ndmin=2)
        return fit_gmm(x, int(spec.get("k", 1)), int(spec.get("iters", 100)), seed)
    if "weights" in spec:
        return GaussianMixture.from_dict(spec)
    return GaussianMixture.isotropic(DP_SIZE, float(spec.get("std", 0.03)),
                                     float(spec.get("mean", 0.0)))


def generate_from_config(cfg: PipelineConfig, graph: EmbeddingGraph | None = None) -> str:
    graph = graph or load_graph(cfg.path(cfg["graph"]))
    d = cfg["dataset"]
    gmm = displacement_prior(d["gmm"], cfg.base_dir, cfg.seed)
    prior = AlphaPrior(**d["alpha_prior"])
    return generate_dataset(graph, int(d["count"]), gmm, prior,
                            CameraRanges.from_dict(d.get("cameras")), cfg.seed,
                            os.path.dirname(cfg.dataset_manifest), float(d["sparsity"]),
                            float(cfg["metrics"]["zero_tol"]),
                            train_fraction=float(d.get("train_fraction", TRAIN_FRACTION)))


# ----------------------------------------------------------------------------- bundle


@dataclass
class TrainedBundle:
    cae: Network
    classifier: Network
    regressor: Network
    graph_path: str = ""
    config: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    # heads see (z - latent_shift) / latent_scale; identity when unset
    latent_shift: np.ndarray | None = None
    latent_scale: float = 1.0

    def latent(self, x) -> np.ndarray:
        z = self.cae.encode(x)
        if self.latent_shift is not None:
            z = z - self.latent_shift
        return (z / self.latent_scale).astype(self.cae.dtype, copy=False)

    @property
    def n_nodes(self) -> int:
        return self.classifier.output_shape[0]

    def check(self, graph: EmbeddingGraph):
        if self.n_nodes != graph.n_nodes:
            raise PipelineError("bundle", f"classifier has {self.n_nodes} labels, "
                                          f"graph has {graph.n_nodes} nodes")
        if self.regressor.output_shape[0] != DP_SIZE + graph.n_nodes:
            raise PipelineError("bundle", "regressor width does not match graph")

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(self.cae, os.path.join(directory, "cae.ckpt"))
        save_checkpoint(self.classifier, os.path.join(directory, "classifier.ckpt"))
        save_checkpoint(self.regressor, os.path.join(directory, "regressor.ckpt"))
        meta = {"graph": self.graph_path, "config": self.config,
                "latent_scale": float(self.latent_scale)}
        if self.latent_shift is not None:
            np.save(os.path.join(directory, "latent_shift.npy"), self.latent_shift)
        with open(os.path.join(directory, "bundle.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        with open(os.path.join(directory, "losses.json"), "w", encoding="utf-8") as fh:
            json.dump(self.losses, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, directory):
        try:
            with open(os.path.join(directory, "bundle.json"), "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            losses = {}
            lp = os.path.join(directory, "losses.json")
            if os.path.exists(lp):
                with open(lp, "r", encoding="utf-8") as fh:
                    losses = json.load(fh)
            sp = os.path.join(directory, "latent_shift.npy")
            shift = np.load(sp) if os.path.exists(sp) else None
            return cls(load_checkpoint(os.path.join(directory, "cae.ckpt")),
                       load_checkpoint(os.path.join(directory, "classifier.ckpt")),
                       load_checkpoint(os.path.join(directory, "regressor.ckpt")),
                       meta.get("graph", ""), meta.get("config", {}), losses, shift,
                       float(meta.get("latent_scale", 1.0)))
        except (OSError, ValueError) as exc:
            raise PipelineError("bundle", f"cannot load {directory}: {exc}") from exc


# --------------------------------------------------------------------------- training


def prepare_image(image) -> np.ndarray:
    """Render-size or input-size raster to a ``(1, 220, 220)`` network input."""
    img = np.asarray(image)
    if img.shape != (INPUT_SIZE, INPUT_SIZE):
        img = resize_to_input(img)
    return to_network_input(img)[None]


def load_images(ds, records) -> np.ndarray:
    return np.stack([prepare_image(load_pgm(ds.path(r.image))) for r in records])


def one_hot(labels, n) -> np.ndarray:
    out = np.zeros((len(labels), n))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def train_pipeline(cfg: PipelineConfig, progress=None) -> TrainedBundle:
    """Generate data if needed, train the autoencoder, then both heads on the
    frozen encoder's latents. Saves the bundle under ``<output>/bundle``."""
    cfg.validate()
    gpath = cfg.path(cfg["graph"])
    try:
        graph = load_graph(gpath)
    except (OSError, ValueError) as exc:
        raise PipelineError("graph", str(exc)) from exc
    if not os.path.exists(cfg.dataset_manifest):
        try:
            generate_from_config(cfg, graph)
        except (OSError, ValueError) as exc:
            raise PipelineError("gen-data", str(exc)) from exc
    ds = load_dataset(cfg.dataset_manifest)
    if ds.n_nodes != graph.n_nodes:
        raise PipelineError("gen-data", "dataset node count differs from graph")
    recs = ds.split("train")
    if not recs:
        raise PipelineError("train", "empty training split")
    dtype = np.dtype(cfg["dtype"])
    x = load_images(ds, recs).astype(dtype)

    def stage_progress(stage):
        if progress is None:
            return None
        return lambda epoch, loss: progress(stage, epoch, loss)

    try:
        cae = build_cae(seed=cfg.seed * 1000 + 1, dtype=dtype)
        r_cae = train(cae, x, x, "mse", cfg.train_config("cae", 11), "cae", stage_progress("cae"))
        z = batched(cae, x, encode=True)
        # Centre each latent feature and divide by one global spread; the raw
        # code has a large common offset that stalls the heads.
        shift = z.mean(axis=0)
        scale = float(np.std(z - shift)) or 1.0
        z = ((z - shift) / scale).astype(dtype)
        labels = np.array([r.label for r in recs])
        clf = build_classifier(graph.n_nodes, seed=cfg.seed * 1000 + 2, dtype=dtype)
        r_clf = train(clf, z, one_hot(labels, graph.n_nodes), "multilabel_soft_margin",
                      cfg.train_config("heads", 12), "classifier", stage_progress("classifier"))
        kappa = np.stack([r.kappa for r in recs])
        reg = build_regressor(DP_SIZE + graph.n_nodes, seed=cfg.seed * 1000 + 3, dtype=dtype)
        r_reg = train(reg, z, kappa, "mse", cfg.train_config("heads", 13), "regressor",
                      stage_progress("regressor"))
    except TrainingDiverged as exc:
        raise PipelineError(exc.stage or "train", str(exc)) from exc
    bundle = TrainedBundle(cae, clf, reg, os.path.relpath(gpath, cfg.bundle_dir),
                           copy.deepcopy(cfg.data),
                           {"cae": r_cae.losses, "classifier": r_clf.losses,
                            "regressor": r_reg.losses}, shift, scale)
    bundle.save(cfg.bundle_dir)
    return bundle


# ---------------------------------------------------------------------- reconstruction


def reconstruct_from_params(graph: EmbeddingGraph, params: ShapeParams,
                            zero_tol=DEFAULT_ZERO_TOL) -> Mesh:
    return deform_node(graph, params, zero_tol)[0]


@dataclass
class Reconstruction:
    mesh: Mesh
    params: ShapeParams
    selected: Mesh
    ffd: Mesh
    logits: np.ndarray
    latent: np.ndarray


def reconstruct(image, bundle: TrainedBundle, graph: EmbeddingGraph,
                zero_tol=DEFAULT_ZERO_TOL) -> Reconstruction:
    """Encode, classify (argmax, lowest id on ties), regress the shape code,
    deform the selected node and blend with its neighbours."""
    bundle.check(graph)
    x = prepare_image(image)
    z = bundle.latent(x[None].astype(bundle.cae.dtype))
    logits = bundle.classifier.forward(z)[0]
    c = int(np.argmax(logits))
    kappa = bundle.regressor.forward(z)[0]
    params = ShapeParams.from_kappa(c, kappa, graph.n_nodes)
    final, ffd = deform_node(graph, params, zero_tol)
    return Reconstruction(final, params, graph.mesh(c), ffd, logits, z[0])


# -------------------------------------------------------------------------- evaluation


@dataclass
class RecordResult:
    index: int
    label: int
    predicted: int
    cae_mse: float
    params_mse: float
    dist3d: float
    iou: float
    dist3d_node: float


def evaluate(bundle: TrainedBundle | None, ds, graph: EmbeddingGraph, split="test",
             samples=M.DEFAULT_SAMPLES, resolution=M.DEFAULT_RESOLUTION,
             zero_tol=DEFAULT_ZERO_TOL, seed=0, oracle=False, class_name="synthetic"):
    """Score a dataset split; returns ``(EvalReport, [RecordResult])``.

    With ``oracle=True`` the networks are bypassed and each record is rebuilt
    from its stored parameters (``bundle`` may then be ``None``).
    """
    idx = list(ds.test if split == "test" else ds.train)
    if not idx:
        raise PipelineError("evaluate", f"empty {split} split")
    if bundle is not None:
        bundle.check(graph)
    results = []
    for i in idx:
        rec = ds.records[i]
        gt = load_obj(ds.path(rec.mesh))
        if oracle:
            params, cae_mse = rec.params, 0.0
        else:
            x = prepare_image(load_pgm(ds.path(rec.image)))[None].astype(bundle.cae.dtype)
            recon = bundle.cae.forward(x)
            cae_mse = float(np.mean((recon - x) ** 2))
            z = bundle.latent(x)
            c = int(np.argmax(bundle.classifier.forward(z)[0]))
            params = ShapeParams.from_kappa(c, bundle.regressor.forward(z)[0], graph.n_nodes)
        est = reconstruct_from_params(graph, params, zero_tol)
        s = seed * 100_003 + i
        results.append(RecordResult(
            i, rec.label, params.c, cae_mse, M.params_mse(params.kappa, rec.kappa),
            M.surface_distance(est, gt, samples, s), M.voxel_iou(est, gt, resolution),
            M.surface_distance(graph.mesh(params.c), gt, samples, s),
        ))
    cls = M.classification_metrics([r.predicted for r in results],
                                   [r.label for r in results], graph.n_nodes)
    row = {
        "cae_mse": float(np.mean([r.cae_mse for r in results])),
        **cls,
        "params_mse": float(np.mean([r.params_mse for r in results])),
        "dist3d": float(np.mean([r.dist3d for r in results])),
        "iou": float(np.mean([r.iou for r in results])),
    }
    return M.assemble_report({class_name: row}), results


def untrained_bundle(n_nodes, seed=0, dtype=np.float64) -> TrainedBundle:
    """Freshly initialised networks; the chance-level baseline."""
    return TrainedBundle(build_cae(seed * 1000 + 1, dtype),
                         build_classifier(n_nodes, seed * 1000 + 2, dtype),
                         build_regressor(DP_SIZE + n_nodes, seed * 1000 + 3, dtype))


def write_report(report, results, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.table())
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "report.kv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_kv())
    with open(os.path.join(out_dir, "records.tsv"), "w", encoding="utf-8") as fh:
        cols = list(RecordResult.__dataclass_fields__)
        fh.write("\t".join(cols) + "\n")
        for r in results:
            fh.write("\t".join(repr(getattr(r, c)) for c in cols) + "\n")


def resolve_graph(bundle_dir, bundle: TrainedBundle, override=None) -> EmbeddingGraph:
    path = override or os.path.join(bundle_dir, bundle.graph_path)
    try:
        return load_graph(path)
    except (OSError, GraphError) as exc:
        raise PipelineError("graph", str(exc)) from exc
