"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from ffdrecon._kernels import available_backends


def cases(rng):
    pts = rng.normal(size=(2000, 3))
    tris = rng.normal(size=(400, 3, 3))
    screen = rng.uniform(-10, 266, size=(800, 3, 2))
    inv = rng.uniform(0.1, 1.0, size=(800, 3))
    shade = rng.uniform(0, 255, size=800)
    vtris = rng.uniform(0, 1, size=(600, 3, 3))
    origin = np.full(3, -0.1)
    return {
        "distance 2000x400": lambda k: k.points_triangles_sqdist(pts, tris),
        "raster 800 tris 256x192": lambda k: k.rasterize(screen, inv, shade, 256, 192),
        "voxels 600 tris 32^3": lambda k: k.mark_surface_voxels(vtris, origin, 1.2 / 32, 32),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(rng).items():
        times = {}
        for b, mod in backends.items():
            times[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{name:<26}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
