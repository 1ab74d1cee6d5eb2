"""Bounded-size graph decomposition by Lloyd-style aggregation.

Centers are seeded uniformly at random (one batch per connected component,
so no component is left without a center). Each cycle assigns every node to
its nearest center by unit-weight multi-source BFS (ties to the lower center
index) and then recenters each subdomain on its minimum-eccentricity member
(ties to the lower node index). Iteration stops at the configured cycle cap,
at a fixed point, or when an assignment repeats (limit cycle; nothing new
can be learned after that).
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import backend
from .errors import InputError


@dataclass(frozen=True)
class AggregateDecomposition:
    assignment: np.ndarray  # int64 subdomain index per node
    centers: np.ndarray     # int64 node per subdomain
    n_subdomains: int
    stats: dict = field(default_factory=dict, compare=False)

    def subdomain_arrays(self):
        """(sub_ptr, sub_nodes): nodes grouped by subdomain, ascending node
        order within each group."""
        order = np.argsort(self.assignment, kind="stable")
        counts = np.bincount(self.assignment, minlength=self.n_subdomains)
        ptr = np.zeros(self.n_subdomains + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return ptr, order.astype(np.int64)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.n_subdomains)


def _seed_centers(graph, mean_size, rng):
    adj = sp.csr_matrix(
        (np.ones(graph.col_idx.shape[0]), graph.col_idx, graph.row_ptr),
        shape=(graph.n, graph.n),
    )
    n_comp, labels = connected_components(adj, directed=False)
    centers = []
    for c in range(n_comp):
        nodes = np.flatnonzero(labels == c)
        k = max(1, int(np.ceil(nodes.shape[0] / mean_size)))
        chosen = rng.choice(nodes, size=k, replace=False)
        centers.append(np.sort(chosen))
    return np.concatenate(centers).astype(np.int64)


def lloyd_aggregate(graph, mean_size, cycles, seed, centers=None):
    """Decompose graph into roughly n/mean_size connected subdomains.

    centers: optional explicit initial center nodes (overrides seeding);
    mainly for tests. With cycles=0 a single assignment pass still runs so
    the result is well-formed.
    """
    if mean_size < 1:
        raise InputError("mean_size must be >= 1")
    if cycles < 0:
        raise InputError("cycles must be >= 0")
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = _seed_centers(graph, mean_size, rng)
    else:
        centers = np.asarray(centers, dtype=np.int64)
        if np.unique(centers).shape[0] != centers.shape[0]:
            raise InputError("duplicate centers")
    k = centers.shape[0]
    n = graph.n
    dist = np.empty(n, dtype=np.int64)
    owner = np.empty(n, dtype=np.int64)

    reached = backend.bfs_assign(graph.row_ptr, graph.col_idx, centers, dist, owner)
    if reached != n:
        raise InputError("a graph component has no center; seeding bug")
    def digest(arr):
        return hashlib.blake2b(arr.tobytes(), digest_size=16).digest()

    assignment = owner.copy()
    cycles_run = 0
    seen = {digest(assignment)}
    stopped = "cap"
    for _ in range(cycles):
        new_centers = np.empty(k, dtype=np.int64)
        sub_ptr, sub_nodes = _group(assignment, k)
        backend.subdomain_centers(graph.row_ptr, graph.col_idx, sub_ptr,
                                  sub_nodes, assignment, new_centers)
        centers = new_centers
        backend.bfs_assign(graph.row_ptr, graph.col_idx, centers, dist, owner)
        cycles_run += 1
        if np.array_equal(owner, assignment):
            stopped = "fixed-point"
            assignment = owner.copy()
            break
        assignment = owner.copy()
        key = digest(assignment)
        if key in seen:
            stopped = "limit-cycle"
            break
        seen.add(key)

    sizes = np.bincount(assignment, minlength=k)
    stats = {
        "cycles_run": cycles_run,
        "stopped": stopped,
        "max_size": int(sizes.max()),
        "mean_size": float(sizes.mean()),
        "size_bound_ratio": float(sizes.max() / mean_size),
    }
    return AggregateDecomposition(
        assignment=assignment, centers=centers, n_subdomains=k, stats=stats
    )


def _group(assignment, k):
    order = np.argsort(assignment, kind="stable").astype(np.int64)
    counts = np.bincount(assignment, minlength=k)
    ptr = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, order


def write_decomposition(path, dec):
    with open(path, "w") as fh:
        json.dump(
            {"assignment": dec.assignment.tolist(),
             "centers": dec.centers.tolist()},
            fh,
        )
        fh.write("\n")
