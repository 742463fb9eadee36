#!/usr/bin/env python3
"""Times the numba kernels against their pure-numpy fallbacks.

Both implementations consume the same counter-based random streams, so
outputs agree and the comparison is apples to apples.  Run:

    python benchmarks/bench_backends.py [--small]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from knockforge import accel
from knockforge.rng import RngStream


def timeit(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(small: bool):
    impls = accel.implementations()
    if "numba" not in impls:
        print("numba not importable; nothing to compare")
        return
    rs = RngStream(2024)

    n, d = (200, 80) if small else (400, 200)
    A = rs.normal((n, d))
    A -= A.mean(axis=0)
    A /= np.linalg.norm(A, axis=0)
    beta = np.zeros(d)
    beta[:8] = 3.0
    y = A @ beta + rs.normal(n)
    y -= y.mean()
    lams = (np.abs(A.T @ y).max() / n) * np.logspace(0, -3, 30)
    order = rs.derive("order").permutation(d)

    side = 8 if small else 16
    nbvals = np.arange(-4, 5)
    ptable = np.tile(1.0 / (1.0 + np.exp(-0.4 * nbvals)), (side * side, 1))
    spins0 = np.where(rs.uniform((side, side)) < 0.5, 1, -1).astype(np.int8)
    sweeps = 2000 if small else 5000

    table = np.array([[[6, 2], [3, 5]], [[2, 6], [5, 3]]], dtype=np.int64)
    nchain = 200 if small else 1000
    keys = np.array([RngStream(7).derive("c", i).key for i in range(nchain)], dtype=np.uint64)
    steps = 2000 if small else 5000

    M = rs.normal((n, d))

    cases = {
        "mgs_orthonormalize": lambda impl: impl.mgs_orthonormalize(M),
        "lasso_cd_path": lambda impl: impl.lasso_cd_path(A, y, lams, order),
        "ising_gibbs_sweeps": lambda impl: impl.ising_gibbs_sweeps(
            spins0.copy(), ptable, 99, 0, sweeps
        ),
        "ising_cftp": lambda impl: impl.ising_cftp(side, ptable, 123),
        "mh_table_final_many": lambda impl: impl.mh_table_final_many(table, keys, steps),
    }

    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}  match")
    for name, call in cases.items():
        impls["numba"] and call(impls["numba"])  # jit warmup
        t_nb, out_nb = timeit(lambda: call(impls["numba"]))
        t_np, out_np = timeit(lambda: call(impls["numpy"]), repeat=1)

        def flatten(o):
            if isinstance(o, tuple):
                return np.concatenate([np.asarray(x, dtype=np.float64).ravel() for x in o])
            return np.asarray(o, dtype=np.float64).ravel()

        match = np.allclose(flatten(out_nb), flatten(out_np), atol=1e-9)
        print(
            f"{name:<24}{t_nb*1e3:>10.1f}ms{t_np*1e3:>10.1f}ms{t_np/t_nb:>9.1f}x  {match}"
        )


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--small", action="store_true", help="smaller problem sizes")
    bench(ap.parse_args().small)
