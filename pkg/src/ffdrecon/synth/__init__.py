"""Synthetic data: deformation priors, rendering and dataset generation."""

from .dataset import (CameraRanges, Dataset, DatasetRecord, generate_dataset, graph_radius,
                      load_dataset, make_record, sample_camera, synthesize_model, write_manifest)
from .graphgen import build_synthetic_graph, ring_edges
from .priors import AlphaPrior, GaussianMixture, fit_gmm, sample_alpha, sample_gmm
from .render import (Camera, load_pgm, render, resize_to_input, save_pgm, to_network_input)

__all__ = [
    "AlphaPrior", "Camera", "CameraRanges", "Dataset", "DatasetRecord", "GaussianMixture",
    "build_synthetic_graph", "fit_gmm", "generate_dataset", "graph_radius", "load_dataset",
    "load_pgm", "make_record", "render", "resize_to_input", "ring_edges", "sample_alpha",
    "sample_camera", "sample_gmm", "save_pgm", "synthesize_model", "to_network_input",
    "write_manifest",
]
