#!/usr/bin/env python3
"""Times the hot kernels under both backends: the numba-compiled path and
the pure numpy/python fallback (what you get with GRAM_NUMBA=0).

Run from the repository root:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from gram import kernels
from gram.datasets import CorpusSpec, generate_corpus

REPEATS = 3


def timeit(fn, *args):
    best = float("inf")
    out = None
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    print(f"active backend: {kernels.backend()}")
    corpora = {
        "grid": generate_corpus(CorpusSpec("grid", 10, 50, 100, seed=1)),
        "ba": generate_corpus(CorpusSpec("ba", 10, 50, 100, seed=1)),
        "community": generate_corpus(CorpusSpec("community", 10, 50, 100, seed=1)),
    }
    jit_dist = kernels._capped_distances_jit
    jit_orbit = kernels._orbit_counts_jit
    if jit_dist is None:
        print("numba backend unavailable (GRAM_NUMBA=0 or numba missing); "
              "timing the fallback only")

    print(f"\n{'kernel':<28}{'corpus':<12}{'numba':>12}{'fallback':>12}{'speedup':>10}")
    for name, graphs in corpora.items():
        # all-pairs capped BFS over every graph
        csr = [g.csr() + (g.n,) for g in graphs]
        def run_dist(impl):
            for indptr, indices, n in csr:
                impl(np.ascontiguousarray(indptr), np.ascontiguousarray(indices), n, 4)
        t_py, _ = timeit(run_dist, kernels.capped_distances_numpy)
        if jit_dist is not None:
            run_dist(jit_dist)  # compile outside the timer
            t_nb, _ = timeit(run_dist, jit_dist)
            print(f"{'capped_distances(cap=4)':<28}{name:<12}{t_nb*1e3:>10.1f}ms"
                  f"{t_py*1e3:>10.1f}ms{t_py/t_nb:>9.1f}x")
        else:
            print(f"{'capped_distances(cap=4)':<28}{name:<12}{'-':>12}{t_py*1e3:>10.1f}ms{'':>10}")

        # 4-node graphlet orbit counts
        mats = [np.ascontiguousarray(g.adjacency_matrix(), dtype=np.int64) for g in graphs]
        sets_ = [[set(np.flatnonzero(m[i]).tolist()) for i in range(m.shape[0])] for m in mats]
        def run_orbit_nb():
            for m in mats:
                jit_orbit(m, np.zeros((m.shape[0], 11), dtype=np.int64))
        def run_orbit_py():
            for m, s in zip(mats, sets_):
                kernels.orbit_counts_esu(s, m.shape[0])
        t_py, _ = timeit(run_orbit_py)
        if jit_orbit is not None:
            run_orbit_nb()
            t_nb, _ = timeit(run_orbit_nb)
            print(f"{'orbit_counts':<28}{name:<12}{t_nb*1e3:>10.1f}ms"
                  f"{t_py*1e3:>10.1f}ms{t_py/t_nb:>9.1f}x")
        else:
            print(f"{'orbit_counts':<28}{name:<12}{'-':>12}{t_py*1e3:>10.1f}ms{'':>10}")


if __name__ == "__main__":
    main()
