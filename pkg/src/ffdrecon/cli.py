"""Command line entry point: ``ffdrecon <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import pipeline as P
from .graph import load_graph, save_graph
from .mesh import load_obj, padded_bounds, save_obj, save_voxels, voxelize
from .primitives import box_mesh
from .synth import build_synthetic_graph, load_dataset, load_pgm

log = logging.getLogger("ffdrecon")


def _ensure_parent(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def _overrides(args):
    return {"seed": args.seed} if args.seed is not None else None


def cmd_gen_graph(args):
    if args.base:
        base = load_obj(args.base)
    else:
        base = box_mesh(args.subdivisions, size=(0.6, 0.5, 1.2), center=(0.0, 0.0, 0.0))
    seed = 0 if args.seed is None else args.seed
    graph, dps = build_synthetic_graph(base, args.nodes, args.jitter, seed, args.extra_edges,
                                       axis=args.mirror_axis)
    _ensure_parent(args.out)
    save_graph(graph, args.out)
    np.savetxt(os.path.join(os.path.dirname(os.path.abspath(args.out)), "node_displacements.txt"),
               dps.reshape(len(dps), -1), fmt="%.17g")
    print(f"wrote graph with {graph.n_nodes} nodes, {len(graph.edges)} edges to {args.out}")


def cmd_gen_data(args):
    cfg = P.PipelineConfig.load(args.config, _overrides(args))
    path = P.generate_from_config(cfg)
    print(f"wrote dataset manifest {path}")


def cmd_train(args):
    cfg = P.PipelineConfig.load(args.config, _overrides(args))

    def progress(stage, epoch, loss):
        log.info("%s epoch %d loss %.6g", stage, epoch, loss)

    P.train_pipeline(cfg, progress)
    print(f"wrote bundle {cfg.bundle_dir}")


def cmd_reconstruct(args):
    bundle = P.TrainedBundle.load(args.bundle)
    graph = P.resolve_graph(args.bundle, bundle, args.graph)
    image = load_pgm(args.image)
    zero_tol = bundle.config.get("metrics", {}).get("zero_tol", 1e-3)
    rec = P.reconstruct(image, bundle, graph, zero_tol)
    out = args.out or os.path.splitext(args.image)[0] + "_recon.obj"
    _ensure_parent(out)
    save_obj(rec.mesh, out)
    if args.dump_stages:
        stem = os.path.splitext(out)[0]
        save_obj(rec.selected, stem + "_selected.obj")
        save_obj(rec.ffd, stem + "_ffd.obj")
    info = {"index": rec.params.c, "dp": rec.params.dp.ravel().tolist(),
            "alpha": rec.params.alpha.tolist(), "mesh": out}
    print(json.dumps(info))


def cmd_evaluate(args):
    ds = load_dataset(args.dataset)
    if args.oracle:
        bundle = None
        graph = load_graph(args.graph or ds.path(ds.graph_path))
    else:
        if not args.bundle:
            raise P.PipelineError("evaluate", "--bundle is required unless --oracle is given")
        bundle = P.TrainedBundle.load(args.bundle)
        graph = P.resolve_graph(args.bundle, bundle, args.graph)
    report, results = P.evaluate(bundle, ds, graph, args.split, args.samples, args.resolution,
                                 args.zero_tol, 0 if args.seed is None else args.seed,
                                 args.oracle, args.class_name)
    P.write_report(report, results, args.out)
    sys.stdout.write(report.table())


def cmd_export_voxels(args):
    mesh = load_obj(args.mesh)
    grid = voxelize(mesh, args.resolution, padded_bounds([mesh], args.resolution))
    _ensure_parent(args.out)
    save_voxels(grid, args.out)
    print(f"wrote {grid.count} occupied voxels to {args.out}")


def cmd_run(args):
    cfg = P.PipelineConfig.load(args.config, _overrides(args))
    bundle = P.train_pipeline(cfg)
    ds = load_dataset(cfg.dataset_manifest)
    graph = load_graph(cfg.path(cfg["graph"]))
    m = cfg["metrics"]
    report, results = P.evaluate(bundle, ds, graph, "test", m["samples"], m["resolution"],
                                 m["zero_tol"], cfg.seed, class_name=cfg["class_name"])
    P.write_report(report, results, os.path.join(cfg.output, "eval"))
    sys.stdout.write(report.table())


def build_parser():
    p = argparse.ArgumentParser(prog="ffdrecon", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.set_defaults(func=fn, stage=name)
        return sp

    sp = add("gen-graph", cmd_gen_graph, "build a synthetic embedding graph")
    sp.add_argument("--base", help="template OBJ (default: subdivided box)")
    sp.add_argument("--subdivisions", type=int, default=6)
    sp.add_argument("--nodes", type=int, default=5)
    sp.add_argument("--jitter", type=float, default=0.08,
                    help="per-node FFD std as a fraction of the template extent")
    sp.add_argument("--extra-edges", type=float, default=0.0,
                    help="probability of each non-ring edge")
    sp.add_argument("--mirror-axis", default="x", choices=["x", "y", "z"])
    sp.add_argument("--out", required=True, help="graph manifest path")

    sp = add("gen-data", cmd_gen_data, "render a synthetic dataset")
    sp.add_argument("--config", required=True)

    sp = add("train", cmd_train, "train autoencoder, classifier and regressor")
    sp.add_argument("--config", required=True)

    sp = add("reconstruct", cmd_reconstruct, "mesh from one image")
    sp.add_argument("image", help="PGM image (256x192 render or 220x220 input)")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--graph", help="graph manifest (default: the bundle's)")
    sp.add_argument("--out", help="output OBJ")
    sp.add_argument("--dump-stages", action="store_true",
                    help="also write the selected and FFD-stage meshes")

    sp = add("evaluate", cmd_evaluate, "score a dataset split")
    sp.add_argument("--dataset", required=True, help="dataset manifest")
    sp.add_argument("--bundle")
    sp.add_argument("--graph")
    sp.add_argument("--split", default="test", choices=["train", "test"])
    sp.add_argument("--oracle", action="store_true", help="use ground-truth parameters")
    sp.add_argument("--samples", type=int, default=30_000)
    sp.add_argument("--resolution", type=int, default=32)
    sp.add_argument("--zero-tol", type=float, default=1e-3)
    sp.add_argument("--class-name", default="synthetic")
    sp.add_argument("--out", default="eval")

    sp = add("export-voxels", cmd_export_voxels, "write a mesh's solid voxel grid")
    sp.add_argument("mesh")
    sp.add_argument("--resolution", type=int, default=32)
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, "gen-data, train and evaluate from one config")
    sp.add_argument("--config", required=True)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except P.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: [{args.stage}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
