#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--n 250000] [--repeat 3]

Times each hot kernel on a structured Poisson grid of about n nodes under
both backends and prints the speedup. The full coarsening pipeline row uses
a smaller grid so the fallback finishes promptly.
"""

import argparse
import time

import numpy as np

from amgcoarsen import backend, env, evaluate, lloyd, problems, sparse, tagcn


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n_target, repeat):
    nx = int(round(np.sqrt(n_target)))
    problem = problems.fd_poisson_structured(nx, nx)
    m = problem.matrix
    n = m.n
    graph = sparse.graph_from_matrix(m)
    x = np.random.default_rng(0).standard_normal(n)
    b = np.zeros(n)
    rows = []

    def add(name, size, fn):
        entry = {"kernel": name, "n": size}
        for name_b in backend.available_backends():
            backend.set_backend(name_b)
            entry[name_b] = timeit(fn, repeat)
        rows.append(entry)

    out = np.empty(n)
    add("csr_matvec", n, lambda: backend.csr_matvec(m.row_ptr, m.col_idx,
                                                    m.values, x, out))

    def gs():
        xx = x.copy()
        backend.gauss_seidel_sweeps(m.row_ptr, m.col_idx, m.values, xx, b, 2)
    add("gauss_seidel x2", n, gs)

    absval = np.abs(m.values)
    mask = np.ones(n, dtype=np.uint8)
    fsums = np.empty(n)
    add("masked_row_abs_sums", n,
        lambda: backend.masked_row_abs_sums(m.row_ptr, m.col_idx, absval,
                                            mask, fsums))

    state0 = env.reset(problem, 0.56)
    adv = np.zeros(n)
    dec = lloyd.lloyd_aggregate(graph, 400, 10, seed=0)
    sub_ptr, sub_nodes = dec.subdomain_arrays()

    def sweep():
        s = state0.copy()
        backend.evaluate_sweep(m.row_ptr, m.col_idx, s.absval, s.absdiag,
                               s.theta, s.f, s.v, s.fsum, adv, sub_ptr,
                               sub_nodes)
    add("evaluate_sweep", n, sweep)

    centers = np.linspace(0, n - 1, max(2, n // 400), dtype=np.int64)
    dist = np.empty(n, dtype=np.int64)
    owner = np.empty(n, dtype=np.int64)
    add("bfs_assign", n,
        lambda: backend.bfs_assign(graph.row_ptr, graph.col_idx, centers,
                                   dist, owner))

    new_centers = np.empty(dec.n_subdomains, dtype=np.int64)
    add("subdomain_centers", n,
        lambda: backend.subdomain_centers(graph.row_ptr, graph.col_idx,
                                          sub_ptr, sub_nodes, dec.assignment,
                                          new_centers))

    small = problems.fd_poisson_structured(40, 40)
    net = tagcn.init_network(0)
    add("evaluate_coarsen 40x40", small.matrix.n,
        lambda: evaluate.evaluate_coarsen(net, small, 0.56, mean_size=200,
                                          cycles=20, seed=0))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=250_000,
                    help="approximate kernel benchmark grid size")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    names = backend.available_backends()
    if len(names) < 2:
        print("note: only the python backend is available; build the "
              "extension for a comparison")
    rows = bench(args.n, args.repeat)
    width = max(len(r["kernel"]) for r in rows)
    header = f"{'kernel':<{width}} {'n':>9}"
    for n in names:
        header += f" {n:>12}"
    if len(names) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for r in rows:
        line = f"{r['kernel']:<{width}} {r['n']:>9d}"
        for n in names:
            line += f" {r[n]:>11.4f}s"
        if len(names) == 2:
            line += f" {r['python'] / r['cython']:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
