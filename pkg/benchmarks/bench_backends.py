#!/usr/bin/env python3
"""Benchmark the numba hot kernels against the pure-NumPy fallback.

Each backend runs in its own subprocess (the choice is fixed at import
time via AGGDIFF_NUMBA), with a warm-up call before timing so the numba
numbers exclude JIT compilation. Usage:

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

PAYLOAD = r"""
import json
import time

import numpy as np

from aggdiff import _accel, drift, grid, kernels, solver


def timed(fn, repeats):
    fn()  # warm-up (numba compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def main(quick):
    n_steps = 300 if quick else 2000
    n_cells = 1024 if quick else 4096
    n_matrix = 256 if quick else 1024
    order = 64
    results = {"backend": _accel.BACKEND}

    g1 = grid.RadialGrid(1, 2.0 / n_cells, n_cells)
    u0 = grid.make_initial_condition(grid.GaussianBump(1.0, 0.2), g1)
    matrix = drift.build_interaction_matrix(g1, kernels.neg_abs_kernel())
    config_exp = solver.SolverConfig(epsilon=0.02, t_end=1.0, diffusion_mode="explicit")
    config_imp = solver.SolverConfig(epsilon=0.02, t_end=1.0, diffusion_mode="implicit")

    def run_steps(config):
        field = u0
        velocity = drift.apply_drift(matrix, field)
        dt = 0.5 * solver.positivity_bound(g1, config.epsilon, velocity,
                                           config.cfl_number, config.diffusion_mode)
        for _ in range(n_steps):
            field, _, _ = solver.advance(field, velocity, config, dt)
        return field

    results[f"explicit_steps[{n_steps}x{n_cells}]"] = timed(lambda: run_steps(config_exp), 3)
    results[f"implicit_steps[{n_steps}x{n_cells}]"] = timed(lambda: run_steps(config_imp), 3)

    g2 = grid.RadialGrid(2, 3.0 / n_matrix, n_matrix)
    results[f"matrix_build_2d[{n_matrix}^2x{order}]"] = timed(
        lambda: drift.build_interaction_matrix(
            g2, kernels.exponential_kernel(), quadrature_order=order
        ),
        3,
    )
    print(json.dumps(results))


import sys as _sys
main(_sys.argv[1] == "quick")
"""


def run_backend(numba_flag, quick):
    env = dict(os.environ, AGGDIFF_NUMBA=numba_flag)
    out = subprocess.run(
        [sys.executable, "-c", PAYLOAD, "quick" if quick else "full"],
        env=env, capture_output=True, text=True,
    )
    if out.returncode != 0:
        raise RuntimeError(f"benchmark subprocess failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()

    numba_res = run_backend("1", args.quick)
    numpy_res = run_backend("0", args.quick)
    if numba_res["backend"] != "numba":
        print("warning: numba unavailable; both columns use the NumPy path")

    keys = [k for k in numba_res if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for key in keys:
        a, b = numba_res[key], numpy_res[key]
        print(f"{key:<{width}}  {a:>10.4f}  {b:>10.4f}  {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
