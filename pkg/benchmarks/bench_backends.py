#!/usr/bin/env python3
"""Time the compiled kernels against the interpreted fallback.

Runs the same implicit Euler workloads through ``get_kernels("numba")`` and
``get_kernels("numpy")`` and reports wall times plus the speedup.  The
workload is fixed by seed, so successive invocations are comparable.

Usage::

    python3 benchmarks/bench_backends.py [--steps N] [--n NODES] [--repeats R]
"""

import argparse
import time

import numpy as np

from spde_lab._kernels import (
    KIND_FAST_DIFFUSION,
    KIND_LINEAR_HEAT,
    KIND_P_LAPLACE,
    get_kernels,
)
from spde_lab.noise import rng_substream, standard_normals

WORKLOADS = (
    ("p_laplace (p=1.5)", KIND_P_LAPLACE, 1.5),
    ("fast_diffusion (r=0.5)", KIND_FAST_DIFFUSION, 0.5),
    ("linear_heat", KIND_LINEAR_HEAT, 2.0),
)


def simulate_once(kern, x0, dw, h, kind, exponent):
    rec = np.array([dw.shape[0]], dtype=np.int64)
    status, hns, vint, states, res = kern.simulate(
        x0, dw, h, 1e-3, kind, exponent, 1e-8, 1e-10, 50, 30, 0.0, rec
    )
    if status != -1:
        raise RuntimeError(f"solver failed at step {status} (residual {res:.3e})")
    return hns[-1]


def bench(kern, x0, dw, h, kind, exponent, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        simulate_once(kern, x0, dw, h, kind, exponent)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000, help="implicit steps")
    parser.add_argument("--n", type=int, default=31, help="interior grid nodes")
    parser.add_argument("--repeats", type=int, default=3, help="timed repeats (best-of)")
    args = parser.parse_args(argv)

    h = 1.0 / (args.n + 1)
    x0 = standard_normals(rng_substream(42, 0), args.n) / np.arange(1, args.n + 1)
    dw = 0.01 * standard_normals(rng_substream(42, 1), (args.steps, args.n))

    numba_k = get_kernels("numba")
    numpy_k = get_kernels("numpy")

    print(f"workload: {args.steps} implicit steps on n={args.n}, best of {args.repeats}")
    print(f"{'equation':<24} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for label, kind, exponent in WORKLOADS:
        # compile before timing so the numba column is steady-state cost
        simulate_once(numba_k, x0, dw[:2], h, kind, exponent)
        t_nb = bench(numba_k, x0, dw, h, kind, exponent, args.repeats)
        t_py = bench(numpy_k, x0, dw, h, kind, exponent, args.repeats)
        print(f"{label:<24} {t_nb:>9.4f}s {t_py:>9.4f}s {t_py / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
