#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel through both builds on identical inputs and prints
a timing table with the speedup. The package-level routing is chosen at
import time (GPBAYES_NO_NUMBA); this script side-steps the switch and
calls both implementations directly, so it reports meaningful numbers
regardless of the environment flag. Without numba installed the loop
builds run as plain Python and the table shows why the fallback exists.

Usage:
    python benchmarks/bench_accel.py [--quick]
"""

import argparse
import time

import numpy as np

from gpbayes._accel import USE_NUMBA
from gpbayes.design import _max_min_dist_loops, _max_min_dist_numpy
from gpbayes.kernels import (
    KernelSpec,
    _cross_matrix_loops,
    _cross_matrix_numpy,
    _kernel_matrix_loops,
    _kernel_matrix_numpy,
)
from gpbayes.metrics import _design_error_reps_loops, _design_error_reps_numpy


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up (triggers jit compilation)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    scale = 4 if args.quick else 1
    rows = []

    # kernel matrix assembly
    n = 1200 // scale
    pts = np.ascontiguousarray(rng.uniform(-1, 1, size=(n, 2)))
    a1 = timeit(_kernel_matrix_loops, pts, 2, 0.7, 1.0)
    a2 = timeit(_kernel_matrix_numpy, pts, 2, 0.7, 1.0)
    rows.append((f"kernel_matrix (n={n}, d=2)", a1, a2))

    # cross matrix
    g = np.ascontiguousarray(rng.uniform(-1, 1, size=(4096 // scale, 2)))
    d = np.ascontiguousarray(rng.uniform(-1, 1, size=(64, 2)))
    b1 = timeit(_cross_matrix_loops, g, d, 3, 0.5, 1.0)
    b2 = timeit(_cross_matrix_numpy, g, d, 3, 0.5, 1.0)
    rows.append((f"cross_matrix ({g.shape[0]}x64)", b1, b2))

    # replicated design-error study
    n_rep = 400 // scale
    designs = np.ascontiguousarray(rng.normal(1.0, 1.0, size=(n_rep, 16, 1)))
    f_design = designs[:, :, 0].copy()
    grid = np.ascontiguousarray(np.linspace(-7, 9, 2048 // scale).reshape(-1, 1))
    f_grid = grid[:, 0].copy()
    w = np.full(grid.shape[0], 1.0 / grid.shape[0])
    jit = np.array([0.0, 1e-12, 1e-10, 1e-8, 1e-6])
    c1 = timeit(_design_error_reps_loops, designs, f_design, grid, f_grid, w, 3, 1.0, 1.0, jit, 1e12)
    c2 = timeit(_design_error_reps_numpy, designs, f_design, grid, f_grid, w, 3, 1.0, 1.0, jit, 1e12)
    rows.append((f"design_error_reps (R={n_rep}, N=16)", c1, c2))

    # fill-distance sup over a candidate grid
    cand = np.ascontiguousarray(rng.uniform(0, 1, size=(16384 // scale, 2)))
    pts2 = np.ascontiguousarray(rng.uniform(0, 1, size=(512, 2)))
    d1 = timeit(_max_min_dist_loops, cand, pts2)
    d2 = timeit(_max_min_dist_numpy, cand, pts2)
    rows.append((f"max_min_dist ({cand.shape[0]} cand, 512 pts)", d1, d2))

    print(f"numba available and active for loop builds: {USE_NUMBA}")
    print(f"{'kernel':<40} {'loops[s]':>10} {'numpy[s]':>10} {'loops speedup':>14}")
    for name, t_loop, t_np in rows:
        print(f"{name:<40} {t_loop:>10.4f} {t_np:>10.4f} {t_np / t_loop:>13.1f}x")


if __name__ == "__main__":
    main()
