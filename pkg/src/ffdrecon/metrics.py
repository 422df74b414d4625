"""Reconstruction and classification metrics, and the per-class report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mesh import (Mesh, MeshError, normalizing_transform, padded_bounds,
                   points_to_mesh_distance, sample_surface, voxelize)

DEFAULT_SAMPLES = 30_000
DEFAULT_RESOLUTION = 32


def surface_distance(est: Mesh, gt: Mesh, n_samples=DEFAULT_SAMPLES, seed=0,
                     use_vertices=False, method="brute") -> float:
    """Symmetric mean closest-surface distance between two meshes.

    Both meshes are first mapped by the ground truth's normalising transform
    (bounding box centred, diagonal 1). Each mesh contributes ``n_samples``
    area-uniform surface points (both drawn with ``seed``), or its vertices
    when ``use_vertices`` is set.
    """
    t = normalizing_transform(gt)
    e, g = t.apply(est), t.apply(gt)
    if use_vertices:
        pe, pg = e.vertices, g.vertices
    else:
        pe = sample_surface(e, n_samples, seed).points
        pg = sample_surface(g, n_samples, seed).points
    d_e = points_to_mesh_distance(pe, g, method).mean()
    d_g = points_to_mesh_distance(pg, e, method).mean()
    return float(d_e + d_g)


def voxel_iou(est: Mesh, gt: Mesh, resolution=DEFAULT_RESOLUTION) -> float:
    """Intersection over union of solid occupancy on one shared grid."""
    bounds = padded_bounds([est, gt], resolution)
    a = voxelize(est, resolution, bounds).occupancy
    b = voxelize(gt, resolution, bounds).occupancy
    union = np.count_nonzero(a | b)
    if union == 0:
        raise MeshError("both meshes voxelise to nothing")
    return np.count_nonzero(a & b) / union


def classification_metrics(predicted, truth, num_labels) -> dict:
    """Accuracy plus macro precision and recall, all in percent.

    Macro averages run over classes present in either list; a class never
    predicted scores precision 0.
    """
    p = np.asarray(predicted, dtype=int)
    t = np.asarray(truth, dtype=int)
    if p.shape != t.shape or p.ndim != 1 or not len(p):
        raise ValueError("need two equal-length, non-empty label lists")
    if p.min() < 0 or t.min() < 0 or p.max() >= num_labels or t.max() >= num_labels:
        raise ValueError(f"labels must lie in [0, {num_labels})")
    classes = np.union1d(p, t)
    prec, rec = [], []
    for c in classes:
        tp = np.sum((p == c) & (t == c))
        npred, ntrue = np.sum(p == c), np.sum(t == c)
        prec.append(tp / npred if npred else 0.0)
        rec.append(tp / ntrue if ntrue else 0.0)
    return {
        "accuracy": 100.0 * float(np.mean(p == t)),
        "precision": 100.0 * float(np.mean(prec)),
        "recall": 100.0 * float(np.mean(rec)),
    }


def params_mse(pred_kappa, gt_kappa) -> float:
    a = np.asarray(pred_kappa, dtype=np.float64).ravel()
    b = np.asarray(gt_kappa, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


# Column keys and their table headers, grouped as CAE | selection | params | reconstruction.
COLUMNS = (
    ("cae_mse", "MSE"),
    ("accuracy", "Acc"),
    ("precision", "Prec"),
    ("recall", "Rec"),
    ("params_mse", "MSE"),
    ("dist3d", "dist3D"),
    ("iou", "IoU"),
)
GROUPS = (("CAE", 1), ("3D Model Selection", 3), ("Params Estimation", 1),
          ("3D Reconstruction", 2))


@dataclass
class EvalReport:
    rows: dict  # class name -> {column key: value}
    mean: dict = field(default_factory=dict)

    def to_dict(self):
        return {"columns": [k for k, _ in COLUMNS], "rows": self.rows, "mean": self.mean}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_kv(self) -> str:
        """One ``row key=value ...`` line per class, then the mean."""
        lines = []
        for name, row in list(self.rows.items()) + [("mean", self.mean)]:
            vals = " ".join(f"{k}={row[k]:.10g}" for k, _ in COLUMNS)
            lines.append(f"{name} {vals}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        names = list(self.rows) + ["mean"]
        w0 = max(6, *(len(n) for n in names))
        cw = 9
        head1 = " " * w0 + " | " + " | ".join(g.center(cw * n + 3 * (n - 1)) for g, n in GROUPS)
        cells = [h.rjust(cw) for _, h in COLUMNS]
        head2 = "class".ljust(w0) + " | " + _join_groups(cells)
        out = [head1, head2, "-" * len(head2)]
        for n in names:
            row = self.rows.get(n, self.mean)
            vals = [_fmt_cell(k, row[k]).rjust(cw) for k, _ in COLUMNS]
            out.append(n.ljust(w0) + " | " + _join_groups(vals))
        return "\n".join(out) + "\n"


def _join_groups(cells):
    out, i = [], 0
    for _, n in GROUPS:
        out.append("   ".join(cells[i:i + n]))
        i += n
    return " | ".join(out)


def _fmt_cell(key, v):
    if key in ("accuracy", "precision", "recall"):
        return f"{v:.2f}"
    return f"{v:.4f}"


def assemble_report(per_class: dict) -> EvalReport:
    """``per_class`` maps a class name to its column values; the mean row is
    the unweighted mean over classes."""
    if not per_class:
        raise ValueError("report needs at least one class row")
    rows = {str(k): {c: float(v[c]) for c, _ in COLUMNS} for k, v in per_class.items()}
    mean = {c: float(np.mean([r[c] for r in rows.values()])) for c, _ in COLUMNS}
    for r in list(rows.values()) + [mean]:
        for c in ("accuracy", "precision", "recall"):
            if not 0.0 <= r[c] <= 100.0:
                raise ValueError(f"{c} outside [0, 100]: {r[c]}")
    return EvalReport(rows, mean)
