"""Time one backward stage with the compiled kernels and the numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--grid 60] [--M 4] [--alpha2 1.0] [--repeat 3]

Both backends receive the same next-stage table; the script reports the best
wall time of each and the largest value difference between them.
"""

import argparse
import time

import numpy as np

from adaptive_ppm import config_from_mean_photons
from adaptive_ppm import _backend
from adaptive_ppm.dp import backward_step, last_stage_table
from adaptive_ppm.tables import GridSpec


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=60, help="points per axis")
    ap.add_argument("--M", type=int, default=4)
    ap.add_argument("--alpha2", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = config_from_mean_photons(args.M, args.alpha2)
    grid = GridSpec.for_cardinality(args.M, args.grid)
    last = last_stage_table(cfg, grid)
    cells = grid.n_u * grid.n_v

    results = {}
    for name in sorted(_backend.available()):
        t, table = best_time(lambda: backward_step(last, cfg, grid, backend=name), args.repeat)
        results[name] = table
        print(f"{name:>9}: {t:8.3f} s per stage  ({1e6 * t / cells:8.1f} us/cell, {cells} cells)")

    if len(results) == 2:
        diff = np.abs(results["compiled"].values - results["python"].values).max()
        print(f"max |value difference| = {diff:.2e}")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
