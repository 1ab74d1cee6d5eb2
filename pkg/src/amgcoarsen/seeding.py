"""Deterministic split-stream seeding.

A single root seed is fanned out to the independent random consumers through
numpy SeedSequence spawn keys, so changing e.g. the Lloyd seed stream never
perturbs mesh generation. Purpose labels map to fixed spawn-key slots:

    mesh=0, net-init=1, eps-greedy=2, lloyd=3, convergence=4, bench=5

stream(root, purpose, k) returns a Generator for the k-th consumer of that
purpose (k defaults to 0; e.g. per-episode meshes use k=episode).
"""

import numpy as np

_PURPOSES = {
    "mesh": 0,
    "net-init": 1,
    "eps-greedy": 2,
    "lloyd": 3,
    "convergence": 4,
    "bench": 5,
}


def seed_for(root, purpose, k=0):
    """Derive a child integer seed from (root, purpose, k)."""
    if purpose not in _PURPOSES:
        raise ValueError(f"unknown seed purpose {purpose!r}")
    ss = np.random.SeedSequence(root, spawn_key=(_PURPOSES[purpose], k))
    return int(ss.generate_state(1, np.uint64)[0])


def stream(root, purpose, k=0):
    """Generator seeded from (root, purpose, k)."""
    return np.random.default_rng(seed_for(root, purpose, k))
