"""Compare the compiled and pure-Python time-warping kernels.

    python3 benchmarks/bench_dp.py [--grid-size 101] [--repeat 5]

Both backends must return the same lattice path; the script checks that and
prints the median wall time of each.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from so3fda import estimate as est
from so3fda import gpsim
from so3fda.curves import Warp, interp_geodesic


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid-size", type=int, default=101)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--window", type=int, default=3)
    args = ap.parse_args(argv)

    t = np.linspace(0.0, 1.0, args.grid_size)
    a = gpsim.center_curve(2.0, t).R
    w = Warp(t, t + 0.1 * np.sin(2 * np.pi * t))
    b = interp_geodesic(t, a, w.image)

    backends = ["python"] + (["cython"] if est.BACKEND == "cython" else [])
    images = {}
    for name in backends:
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            images[name] = est.temporal_align_arr(t, a, b, "Imean", args.window, backend=name)
            times.append(time.perf_counter() - t0)
        print(f"{name:7s} median {statistics.median(times) * 1e3:9.2f} ms  (K+1={args.grid_size}, window={args.window})")
    if len(images) == 2:
        same = np.array_equal(images["python"], images["cython"])
        print(f"identical warps: {same}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
