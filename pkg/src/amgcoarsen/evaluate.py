"""Linear-time coarsening at inference.

The node set is decomposed once into bounded-size subdomains; each sweep
evaluates the advantage head on the whole graph and coarsens, per subdomain
holding a violating node, the violating node of largest advantage. Flags are
refreshed locally after every pick (sequential subdomain order), advantages
only once per sweep. Sweeps repeat until no violation remains, which is
guaranteed because every sweep coarsens at least one node while any exists.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend, env, lloyd, sparse, tagcn
from .errors import InputError


@dataclass
class EvalStats:
    sweeps: int = 0
    seconds: float = 0.0
    matvec_calls: int = 0
    matvec_ops: int = 0
    n_coarse: int = 0
    f_fraction: float = 1.0
    picked_per_sweep: list = field(default_factory=list)
    aggregation: dict = field(default_factory=dict)
    decomposition: object = None

    @property
    def matvec_calls_per_sweep(self):
        return self.matvec_calls / max(1, self.sweeps)

    @property
    def matvec_ops_per_sweep(self):
        return self.matvec_ops / max(1, self.sweeps)


def evaluate_coarsen(net, problem, theta, mean_size=400, cycles=1000, seed=0,
                     decomposition=None):
    """Coarsen with the advantage network over a subdomain decomposition.

    Returns (terminal CoarseningState, EvalStats). The decomposition can be
    passed in to reuse across runs; otherwise Lloyd aggregation runs here
    with the given parameters.
    """
    m = problem.matrix
    prop = tagcn.build_propagation_matrix(problem)
    if decomposition is None:
        graph = sparse.graph_from_matrix(m)
        decomposition = lloyd.lloyd_aggregate(graph, mean_size, cycles, seed)
    sub_ptr, sub_nodes = decomposition.subdomain_arrays()

    state = env.reset(problem, theta)
    stats = EvalStats(aggregation=dict(decomposition.stats),
                      decomposition=decomposition)
    calls0, ops0 = backend.matvec_counters()
    t0 = time.perf_counter()
    while state.n_violating > 0:
        _, adv, _ = tagcn.forward(net, problem, state=state, prop=prop,
                                  heads="adv")
        picked, dviol = backend.evaluate_sweep(
            m.row_ptr, m.col_idx, state.absval, state.absdiag, state.theta,
            state.f, state.v, state.fsum, adv, sub_ptr, sub_nodes,
        )
        if picked == 0:
            raise InputError("sweep made no progress; flags corrupted")
        state.n_violating += int(dviol)
        state.n_coarse += int(picked)
        stats.sweeps += 1
        stats.picked_per_sweep.append(int(picked))
    stats.seconds = time.perf_counter() - t0
    calls1, ops1 = backend.matvec_counters()
    stats.matvec_calls = calls1 - calls0
    stats.matvec_ops = ops1 - ops0
    stats.n_coarse = state.n_coarse
    stats.f_fraction = float(state.f.sum() / state.n)
    return state, stats


def measure_scaling(sizes, net, theta=0.56, mean_size=400, cycles=1000, seed=0):
    """Coarsen structured grids of the given node counts; report per-node
    time. sizes must ascend."""
    from . import problems

    if list(sizes) != sorted(sizes):
        raise InputError("sizes must be ascending")
    rows = []
    for target in sizes:
        nx = max(1, int(round(np.sqrt(target))))
        problem = problems.fd_poisson_structured(nx, nx)
        n = problem.matrix.n
        _, stats = evaluate_coarsen(net, problem, theta, mean_size=mean_size,
                                    cycles=cycles, seed=seed)
        rows.append({
            "n": n,
            "seconds": stats.seconds,
            "seconds_per_node": stats.seconds / n,
            "sweeps": stats.sweeps,
            "matvec_calls_per_sweep": stats.matvec_calls_per_sweep,
            "matvec_ops_per_sweep": stats.matvec_ops_per_sweep,
            "f_fraction": stats.f_fraction,
        })
    return rows
