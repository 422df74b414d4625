"""Single-image mesh reconstruction through a graph of deformable templates.

A reconstruction is a graph node index, symmetric free-form-deformation
displacements of that node, and blend weights over its neighbours.
"""

from ._kernels import BACKEND
from .ffd import Deformer, apply_ffd, bernstein, build_deformation_matrix, build_grid, build_symmetry_map
from .graph import EmbeddingGraph, ShapeParams, linear_combine, load_graph, save_graph, subgraph
from .mesh import (Mesh, load_obj, normalize_mesh, point_to_mesh_distance, points_to_mesh_distance,
                   sample_surface, save_obj, voxelize)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Deformer", "EmbeddingGraph", "Mesh", "ShapeParams", "apply_ffd", "bernstein",
    "build_deformation_matrix", "build_grid", "build_symmetry_map", "linear_combine",
    "load_graph", "load_obj", "normalize_mesh", "point_to_mesh_distance",
    "points_to_mesh_distance", "sample_surface", "save_graph", "save_obj", "subgraph",
    "voxelize",
]
