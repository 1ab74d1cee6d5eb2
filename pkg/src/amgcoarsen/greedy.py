"""Greedy baseline: repeatedly coarsen the fine node with the smallest
|a_ii| / sum_{j in F} |a_ij| until no node violates the dominance test.

A lazy binary heap keyed by (ratio, node) gives O((n + m) log n) total work;
stale entries are skipped via per-node stamps bumped whenever a row sum
changes. Ties break to the lowest node index.

Candidate modes: "violating" (default) restricts selection to currently
violating nodes; "all-fine" considers every fine node. While any violation
exists, the global minimum ratio is below theta and therefore belongs to a
violating node, so the two modes select identical sequences; both are kept
for comparison runs.
"""

import heapq

import numpy as np

from . import env
from .errors import ContractViolationError, InputError


def greedy_priority(state, i):
    """Dominance ratio |a_ii| / sum_{j in F} |a_ij| of fine node i."""
    if state.f[i] != 1:
        raise ContractViolationError(f"node {i} is coarse")
    return float(state.absdiag[i] / state.fsum[i])


def greedy_coarsen(problem, theta, mode="violating", record=None):
    """Run the greedy selection to termination; returns the terminal state.

    record: optional EpisodeRecord populated with the per-step trace.
    """
    if mode not in ("violating", "all-fine"):
        raise InputError(f"unknown candidate mode {mode!r}")
    state = env.reset(problem, theta)
    m = problem.matrix
    n = state.n

    def is_candidate(i):
        return state.v[i] == 1 if mode == "violating" else state.f[i] == 1

    stamp = np.zeros(n, dtype=np.int64)
    heap = []
    for i in range(n):
        if is_candidate(i):
            heap.append((state.absdiag[i] / state.fsum[i], i, 0))
    heapq.heapify(heap)

    while state.n_violating > 0:
        ratio, i, st = heapq.heappop(heap)
        if st != stamp[i] or not is_candidate(i):
            continue
        _, reward, _ = env.step(state, i)
        if record is not None:
            record.log_step(i, reward, state.n_violating)
        touched = m.col_idx[m.row_ptr[i]:m.row_ptr[i + 1]]
        for j in touched:
            j = int(j)
            stamp[j] += 1
            if is_candidate(j):
                heapq.heappush(
                    heap, (state.absdiag[j] / state.fsum[j], j, int(stamp[j]))
                )
    if record is not None:
        record.f_fraction = float(state.f.sum() / n)
    return state
