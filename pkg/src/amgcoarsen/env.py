"""Sequential coarsening environment.

State is a pair of per-node flags: f (1 = fine) and v (1 = fine and failing
the row dominance test |a_ii| >= theta * sum_{j in F} |a_ij|, the sum taken
over stored entries of row i whose column is currently fine, diagonal
included while i itself is fine). An action coarsens one violating node;
the episode ends when no node violates. Reward after the k-th action is -k,
the negative coarse-node count.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ContractViolationError, InputError


@dataclass
class CoarseningState:
    problem: object
    theta: float
    f: np.ndarray        # uint8, 1 = fine
    v: np.ndarray        # uint8, 1 = violating (implies fine)
    fsum: np.ndarray     # float64, current F-restricted abs row sums
    absval: np.ndarray   # |values| aligned with matrix CSR data
    absdiag: np.ndarray
    n_coarse: int = 0
    n_violating: int = 0

    @property
    def n(self):
        return int(self.f.shape[0])

    def coarse_nodes(self):
        return np.flatnonzero(self.f == 0)

    def copy(self):
        return CoarseningState(
            problem=self.problem, theta=self.theta,
            f=self.f.copy(), v=self.v.copy(), fsum=self.fsum.copy(),
            absval=self.absval, absdiag=self.absdiag,
            n_coarse=self.n_coarse, n_violating=self.n_violating,
        )


@dataclass
class EpisodeRecord:
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    n_violating: list = field(default_factory=list)
    f_fraction: float = 1.0

    @property
    def payoff(self):
        return float(sum(self.rewards))

    def log_step(self, action, reward, n_violating):
        self.actions.append(int(action))
        self.rewards.append(float(reward))
        self.n_violating.append(int(n_violating))


def reset(problem, theta):
    """Initial state: all nodes fine, violation flags from the full row sums."""
    if not (0.0 < theta < 1.0):
        raise InputError(f"theta must be in (0,1), got {theta}")
    m = problem.matrix
    absval = np.abs(m.values)
    absdiag = np.abs(m.diagonal())
    f = np.ones(m.n, dtype=np.uint8)
    fsum = np.empty(m.n)
    backend.masked_row_abs_sums(m.row_ptr, m.col_idx, absval, f, fsum)
    v = ((absdiag < theta * fsum) & (f == 1)).astype(np.uint8)
    return CoarseningState(
        problem=problem, theta=theta, f=f, v=v, fsum=fsum,
        absval=absval, absdiag=absdiag,
        n_coarse=0, n_violating=int(v.sum()),
    )


def actions(state):
    """Nodes currently violating, ascending."""
    return np.flatnonzero(state.v == 1)


def step(state, a):
    """Coarsen violating node a in place. Returns (state, reward, terminal).

    Stepping a node that is not a legal action is a contract violation, not
    an environment event.
    """
    a = int(a)
    if not (0 <= a < state.n) or state.v[a] != 1:
        raise ContractViolationError(f"node {a} is not a violating fine node")
    m = state.problem.matrix
    dviol = backend.coarsen_node(
        m.row_ptr, m.col_idx, state.absval, state.absdiag, state.theta,
        state.f, state.v, state.fsum, a,
    )
    state.n_violating += int(dviol)
    state.n_coarse += 1
    reward = -float(state.n_coarse)
    return state, reward, state.n_violating == 0


def check_constraint(state):
    """True iff no fine node violates the dominance test."""
    return state.n_violating == 0


def recompute_violations(state):
    """From-scratch (fsum, v) for the current f; the incremental-update
    oracle used by tests."""
    m = state.problem.matrix
    fsum = np.empty(state.n)
    backend.masked_row_abs_sums(m.row_ptr, m.col_idx, state.absval, state.f, fsum)
    v = ((state.absdiag < state.theta * fsum) & (state.f == 1)).astype(np.uint8)
    return fsum, v


def random_rollout(problem, theta, rng):
    """Play uniformly random legal actions to termination."""
    state = reset(problem, theta)
    record = EpisodeRecord()
    while state.n_violating > 0:
        acts = actions(state)
        a = int(acts[rng.integers(acts.shape[0])])
        _, reward, _ = step(state, a)
        record.log_step(a, reward, state.n_violating)
    record.f_fraction = float(state.f.sum() / state.n)
    return state, record


def write_episode_trace(path, record):
    """Episode trace as JSON lines: one record per step."""
    with open(path, "w") as fh:
        for k, (a, r, nv) in enumerate(
            zip(record.actions, record.rewards, record.n_violating)
        ):
            fh.write(json.dumps(
                {"step": k, "action": a, "reward": r, "n_violating": nv}
            ))
            fh.write("\n")
