"""Time the numba and numpy kernel variants on one synthetic pair.

    python3 benchmarks/bench_kernels.py [--height 375 --width 450 --max-disp 64 --repeat 3]
"""

import argparse
import time

import numpy as np

from guided_stereo import kernels
from guided_stereo._accel import HAVE_NUMBA
from guided_stereo.sgm import PATHS_8
from guided_stereo.synthetic import make_scene


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--height", type=int, default=375)
    ap.add_argument("--width", type=int, default=450)
    ap.add_argument("--max-disp", type=int, default=64)
    ap.add_argument("--radius", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    left, right, _ = make_scene(0, args.height, args.width, args.max_disp)
    n = kernels.census_words(args.radius)
    nbits = np.float32((2 * args.radius + 1) ** 2 - 1)
    cl = kernels.census_numpy(left.data, args.radius, n)
    cr = kernels.census_numpy(right.data, args.radius, n)
    costs = kernels.hamming_volume_numpy(cl, cr, args.max_disp, nbits)

    variants = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    table = {
        "census": lambda b: getattr(kernels, f"census_{b}")(left.data, args.radius, n),
        "hamming": lambda b: getattr(kernels, f"hamming_volume_{b}")(cl, cr, args.max_disp, nbits),
        "aggregate (8 paths)": lambda b: getattr(kernels, f"aggregate_{b}")(costs, PATHS_8, 10.0, 120.0),
    }
    if HAVE_NUMBA:
        for fn in table.values():
            fn("numba")  # compile / load cache

    print(f"{args.width}x{args.height}, D={args.max_disp}, census radius {args.radius}, best of {args.repeat}")
    print(f"{'kernel':<22s}" + "".join(f"{v:>12s}" for v in variants) + ("     speedup" if HAVE_NUMBA else ""))
    for name, fn in table.items():
        t = {v: best_of(lambda: fn(v), args.repeat) for v in variants}
        line = f"{name:<22s}" + "".join(f"{t[v]:11.3f}s" for v in variants)
        if HAVE_NUMBA:
            line += f"{t['numpy'] / t['numba']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
