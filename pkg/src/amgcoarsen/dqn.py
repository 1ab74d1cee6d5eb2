"""Double-DQN training over random-mesh coarsening episodes.

Three networks cooperate: the online network is trained every environment
step, the target network is hard-copied from it every few episodes, and a
frozen network is hard-copied from the target every few learning steps. The
frozen copy scores the online argmax action in the TD target (the cascade
collapses to standard double DQN with frozen == target in "two-net" mode).
Returns are undiscounted by default so the episode payoff keeps its exact
closed form.
"""

import collections
import csv
import math
import os
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import env, mesh, problems, seeding, tagcn
from .errors import AmgCoarsenError, ContractViolationError, InputError


@dataclass
class Transition:
    problem: object
    prop: object            # propagation matrix, shared per problem
    n: int
    f_bits: np.ndarray      # packed fine flags before the action
    v_bits: np.ndarray
    action: int
    reward: float
    next_f_bits: np.ndarray
    next_v_bits: np.ndarray
    terminal: bool

    def state_features(self):
        return _unpack_features(self.f_bits, self.v_bits, self.n)

    def next_state_features(self):
        return _unpack_features(self.next_f_bits, self.next_v_bits, self.n)

    def next_actions(self):
        v = np.unpackbits(self.next_v_bits, count=self.n)
        return np.flatnonzero(v == 1)


def _unpack_features(f_bits, v_bits, n):
    f = np.unpackbits(f_bits, count=n).astype(np.float64)
    v = np.unpackbits(v_bits, count=n).astype(np.float64)
    return np.stack([f, v], axis=1)


def snapshot_transition(problem, prop, state_before, action, reward,
                        state_after, terminal):
    return Transition(
        problem=problem, prop=prop, n=state_before.n,
        f_bits=np.packbits(state_before.f), v_bits=np.packbits(state_before.v),
        action=int(action), reward=float(reward),
        next_f_bits=np.packbits(state_after.f),
        next_v_bits=np.packbits(state_after.v),
        terminal=bool(terminal),
    )


class ReplayBuffer:
    """FIFO ring of transitions."""

    def __init__(self, capacity=5000):
        self.capacity = capacity
        self._items = collections.deque(maxlen=capacity)

    def __len__(self):
        return len(self._items)

    def push(self, transition):
        self._items.append(transition)

    def sample(self, batch, rng):
        """Uniform with replacement."""
        idx = rng.integers(0, len(self._items), size=batch)
        return [self._items[int(i)] for i in idx]


@dataclass
class TrainerConfig:
    episodes: int = 10000
    lr: float = 1e-3
    batch: int = 32
    buffer_capacity: int = 5000
    eps_start: float = 1.0
    eps_min: float = 1e-2
    eps_decay: float = 1.25e-4      # linear, per episode
    target_sync_episodes: int = 4
    frozen_sync_learn_steps: int = 10
    gamma: float = 1.0
    node_min: int = 30
    node_max: int = 120
    theta: float = 0.56
    seed: int = 0
    hidden: int = 32
    hops: int = 4
    dueling_mode: str = "sum"
    double_mode: str = "three-net"  # or "two-net"
    loss: str = "huber"             # or "mse"
    checkpoint_every: int = 1000
    out_dir: Optional[str] = None

    def epsilon(self, episode):
        return max(self.eps_min, self.eps_start - episode * self.eps_decay)


def select_action(net, problem, state, epsilon, rng, prop=None):
    """Epsilon-greedy over the violating nodes; greedy ties break to the
    lowest node index."""
    acts = env.actions(state)
    if acts.shape[0] == 0:
        raise ContractViolationError("no actions in a terminal state")
    if rng.random() < epsilon:
        return int(acts[rng.integers(acts.shape[0])])
    _, _, q = tagcn.forward(net, problem, state=state, prop=prop)
    return int(acts[int(np.argmax(q[acts]))])


def td_target(batch, online_net, eval_net, gamma):
    """One TD target per transition: r, or r + gamma * Q_eval(s', a*) with
    a* the online argmax over the violating nodes of s'."""
    if not batch:
        raise InputError("empty batch")
    y = np.empty(len(batch))
    for i, t in enumerate(batch):
        if t.terminal:
            y[i] = t.reward
            continue
        feats = t.next_state_features()
        acts = t.next_actions()
        _, _, q_online = tagcn.forward(online_net, t.problem, features=feats,
                                       prop=t.prop)
        a_star = int(acts[int(np.argmax(q_online[acts]))])
        _, _, q_eval = tagcn.forward(eval_net, t.problem, features=feats,
                                     prop=t.prop)
        y[i] = t.reward + gamma * q_eval[a_star]
    return y


class Adam:
    def __init__(self, net, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: (np.zeros_like(l.g), np.zeros_like(l.b))
                  for name, l in net.layers()}
        self.v = {name: (np.zeros_like(l.g), np.zeros_like(l.b))
                  for name, l in net.layers()}

    def step(self, net, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, layer in net.layers():
            for arr, g, m, v in zip((layer.g, layer.b), grads[name],
                                    self.m[name], self.v[name]):
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * g * g
                arr -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _loss_and_slope(err, kind):
    """Per-sample loss value and d(loss)/d(err)."""
    if kind == "huber":
        if abs(err) <= 1.0:
            return 0.5 * err * err, err
        return abs(err) - 0.5, math.copysign(1.0, err)
    if kind == "mse":
        return err * err, 2.0 * err
    raise InputError(f"unknown loss {kind!r}")


def learn_step(online_net, eval_net, buffer, cfg, rng, adam):
    """One sampled-batch update of the online network. Returns the mean
    loss, or None (no-op) while the buffer holds fewer than batch items."""
    if len(buffer) < cfg.batch:
        return None
    batch = buffer.sample(cfg.batch, rng)
    y = td_target(batch, online_net, eval_net, cfg.gamma)
    grads = tagcn.zero_gradients(online_net)
    total = 0.0
    for i, t in enumerate(batch):
        tape = {}
        _, _, q = tagcn.forward(online_net, t.problem,
                                features=t.state_features(), prop=t.prop,
                                tape=tape)
        loss_i, slope = _loss_and_slope(float(q[t.action] - y[i]), cfg.loss)
        total += loss_i
        dq = np.zeros(t.n)
        dq[t.action] = slope / cfg.batch
        tagcn.backward(online_net, tape, dq, grads)
    adam.step(online_net, grads)
    return total / cfg.batch


def random_training_problem(cfg, episode):
    """Fresh random-mesh Poisson instance for one episode; resamples until
    the mesh has interior vertices."""
    rng = seeding.stream(cfg.seed, "mesh", episode)
    for _ in range(20):
        n_points = int(rng.integers(4, 16))
        lo = int(rng.integers(cfg.node_min, cfg.node_max + 1))
        mesh_seed = int(rng.integers(np.iinfo(np.int64).max))
        m = mesh.random_convex_mesh(n_points, (lo, cfg.node_max), mesh_seed)
        if np.any(m.boundary == 0):
            return problems.fem_p1_laplacian(m)
    raise AmgCoarsenError("could not draw a mesh with interior vertices")


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def log(self, episode, payoff, f_fraction, epsilon, mean_loss):
        self.rows.append({
            "episode": episode, "payoff": payoff, "f_fraction": f_fraction,
            "epsilon": epsilon, "mean_loss": mean_loss,
        })

    def write_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.DictWriter(
                fh, fieldnames=["episode", "payoff", "f_fraction", "epsilon",
                                "mean_loss"])
            w.writeheader()
            for row in self.rows:
                w.writerow(row)


def train(cfg, progress=None):
    """Full training loop; returns (online network, TrainingLog).

    progress: optional callback(episode, log_row) for CLI reporting.
    """
    online = tagcn.init_network(seeding.seed_for(cfg.seed, "net-init"),
                                hidden=cfg.hidden, hops=cfg.hops,
                                dueling_mode=cfg.dueling_mode)
    target = online.copy()
    frozen = target.copy()
    buffer = ReplayBuffer(cfg.buffer_capacity)
    adam = Adam(online, cfg.lr)
    act_rng = seeding.stream(cfg.seed, "eps-greedy")
    log = TrainingLog()
    learn_steps = 0

    for episode in range(cfg.episodes):
        problem = random_training_problem(cfg, episode)
        prop = tagcn.build_propagation_matrix(problem)
        state = env.reset(problem, cfg.theta)
        epsilon = cfg.epsilon(episode)
        payoff = 0.0
        losses = []
        terminal = state.n_violating == 0
        while not terminal:
            before = state.copy()
            action = select_action(online, problem, state, epsilon, act_rng,
                                   prop=prop)
            _, reward, terminal = env.step(state, action)
            payoff += reward
            buffer.push(snapshot_transition(problem, prop, before, action,
                                            reward, state, terminal))
            eval_net = frozen if cfg.double_mode == "three-net" else target
            loss = learn_step(online, eval_net, buffer, cfg, act_rng, adam)
            if loss is not None:
                losses.append(loss)
                learn_steps += 1
                if not math.isfinite(loss):
                    _abort_checkpoint(cfg, online, episode)
                if learn_steps % cfg.frozen_sync_learn_steps == 0:
                    frozen = target.copy()
        if (episode + 1) % cfg.target_sync_episodes == 0:
            target = online.copy()
        mean_loss = float(np.mean(losses)) if losses else math.nan
        row = dict(episode=episode, payoff=payoff,
                   f_fraction=float(state.f.sum() / state.n),
                   epsilon=epsilon, mean_loss=mean_loss)
        log.rows.append(row)
        if progress is not None:
            progress(episode, row)
        if cfg.out_dir and cfg.checkpoint_every and \
                (episode + 1) % cfg.checkpoint_every == 0:
            tagcn.save_weights(
                online, os.path.join(cfg.out_dir, f"checkpoint-{episode + 1:06d}.agcw"))
    if cfg.out_dir:
        tagcn.save_weights(online, os.path.join(cfg.out_dir, "weights-final.agcw"))
    return online, log


def _abort_checkpoint(cfg, net, episode):
    path = None
    if cfg.out_dir:
        path = os.path.join(cfg.out_dir, f"diagnostic-nan-ep{episode}.agcw")
        tagcn.save_weights(net, path)
    raise AmgCoarsenError(
        f"non-finite loss at episode {episode}"
        + (f"; diagnostic checkpoint at {path}" if path else "")
    )


def config_from_dict(doc):
    """TrainerConfig from a JSON-style dict, rejecting unknown keys."""
    known = {f for f in TrainerConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise InputError(f"unknown trainer config keys: {sorted(unknown)}")
    return TrainerConfig(**doc)


def config_to_dict(cfg):
    return asdict(cfg)
