"""Acceptance suite: one test per criterion, each printing a PASS line on
success (failures surface as normal pytest failures).

Criterion 8 trains an agent and is gated behind environment variables:
  AMGCOARSEN_ACCEPT_TRAIN_SMOKE=1  500-episode pinned-seed variant (~15 min)
  AMGCOARSEN_ACCEPT_TRAIN_FULL=1   full 10k-episode training (~hours)
"""

import os
from itertools import product

import numpy as np
import pytest

from amgcoarsen import (dqn, env, evaluate, greedy, mesh, metrics, problems,
                        tagcn, twogrid)

THETA = 0.56


def report(n, text):
    print(f"[acceptance] criterion {n}: PASS - {text}")


# ------------------------------------------------------------- criterion 1

def theta_feasible_dense(dense, fine, theta):
    n = len(fine)
    for i in range(n):
        if not fine[i]:
            continue
        s = sum(abs(dense[i, j]) for j in range(n) if fine[j])
        if abs(dense[i, i]) < theta * s:
            return False
    return True


def test_criterion_1_environment_oracle():
    p = problems.fd_poisson_structured(3, 3)
    s = env.reset(p, THETA)
    assert env.actions(s).tolist() == [4], "only the center violates at reset"
    record = env.EpisodeRecord()
    s, reward, terminal = env.step(s, 4)
    record.log_step(4, reward, s.n_violating)
    assert terminal
    assert record.payoff == -1.0
    assert metrics.f_fraction(s) == pytest.approx(8 / 9)

    # independent oracle: enumerate all 2^9 splittings under the dominance
    # test in dense arithmetic
    dense = p.matrix.to_dense()
    best = 9
    for bits in product([1, 0], repeat=9):
        if theta_feasible_dense(dense, bits, THETA):
            best = min(best, 9 - sum(bits))
    assert best == 1
    assert s.n_coarse == best
    report(1, "3x3 oracle: unique episode, payoff -1, F-fraction 8/9, "
              "brute force confirms n_c = 1")


# ------------------------------------------------------------- criterion 2

def test_criterion_2_payoff_identity():
    rng = np.random.default_rng(2)
    for episode in range(200):
        m = mesh.random_convex_mesh(6, (30, 60), seed=episode)
        p = problems.fem_p1_laplacian(m)
        _, record = env.random_rollout(p, THETA, rng)
        nc = len(record.actions)
        assert record.payoff == -nc * (nc + 1) / 2
    report(2, "payoff = -n_c(n_c+1)/2 exactly over 200 random-mesh episodes")


# ------------------------------------------------------------- criterion 3

def test_criterion_3_convergence_guarantee():
    net = tagcn.init_network(314159)
    rhos = {"greedy": [], "rl": []}
    for nx in (8, 16, 32):
        p = problems.fd_poisson_structured(nx, nx)
        splittings = {
            "greedy": greedy.greedy_coarsen(p, THETA),
            "rl": evaluate.evaluate_coarsen(net, p, THETA, mean_size=400,
                                            cycles=1000, seed=42)[0],
        }
        for method, state in splittings.items():
            assert env.check_constraint(state)
            h = twogrid.build_hierarchy(p.matrix, state.f)
            rho = twogrid.measure_convergence_factor(h, trials=3, cycles=20,
                                                     seed=1234)
            assert 0.0 < rho < 1.0, (method, nx, rho)
            rhos[method].append(rho)
    for method, values in rhos.items():
        spread = max(values) - min(values)
        assert spread <= 0.15, (method, values)
    report(3, "rho < 1 for greedy and random-net splittings on 8^2..32^2; "
              f"spreads {[round(max(v) - min(v), 4) for v in rhos.values()]} "
              "<= 0.15")


# ------------------------------------------------------------- criterion 4

def test_criterion_4_structured_bound():
    net = tagcn.init_network(271828)
    rng = np.random.default_rng(4)
    checked = 0
    for nx, ny in ((8, 8), (16, 16), (10, 14), (32, 32)):
        p = problems.fd_poisson_structured(nx, ny)
        bound = metrics.structured_upper_bound(nx, ny)
        states = [greedy.greedy_coarsen(p, THETA),
                  evaluate.evaluate_coarsen(net, p, THETA, seed=7)[0]]
        states.append(env.random_rollout(p, THETA, rng)[0])
        for state in states:
            assert env.check_constraint(state)
            assert metrics.f_fraction(state) <= bound
            assert metrics.verify_pentomino_bound(state.f, nx, ny)
            checked += 1
    report(4, f"F-fraction <= Eq-bound and pentomino cover for {checked} "
              "feasible splittings")


# ------------------------------------------------------------- criterion 5

def test_criterion_5_gradient_correctness():
    rng = np.random.default_rng(5)
    net = tagcn.init_network(55)
    p = problems.fd_poisson_structured(4, 4)
    s = env.reset(p, THETA)
    action = int(env.actions(s)[0])
    target = -3.0

    def loss():
        _, _, q = tagcn.forward(net, p, state=s)
        e = q[action] - target
        return 0.5 * e * e if abs(e) <= 1 else abs(e) - 0.5

    tape = {}
    _, _, q = tagcn.forward(net, p, state=s, tape=tape)
    e = float(q[action] - target)
    slope = e if abs(e) <= 1 else np.sign(e)
    grads = tagcn.zero_gradients(net)
    dq = np.zeros(s.n)
    dq[action] = slope
    tagcn.backward(net, tape, dq, grads)

    h = 1e-5
    layer_names = [name for name, _ in net.layers()]
    checked = 0
    worst = 0.0
    while checked < 50:
        name = layer_names[checked % 4]
        layer = dict(net.layers())[name]
        idx = tuple(rng.integers(0, d) for d in layer.g.shape)
        orig = layer.g[idx]
        layer.g[idx] = orig + h
        up = loss()
        layer.g[idx] = orig - h
        down = loss()
        layer.g[idx] = orig
        fd = (up - down) / (2 * h)
        an = grads[name][0][idx]
        rel = abs(fd - an) / max(1.0, abs(fd))
        worst = max(worst, rel)
        assert rel <= 1e-5, (name, idx, fd, an)
        checked += 1
    report(5, f"50 finite-difference checks across all 4 layers, worst "
              f"relative error {worst:.2e} <= 1e-5")


# ------------------------------------------------------------- criterion 6

def test_criterion_6_advantage_locality():
    net = tagcn.init_network(606)
    assert net.receptive_hops() == 12
    values = {}
    for nx in (15, 45):
        p = problems.fd_poisson_structured(nx, nx)
        s = env.reset(p, THETA)
        _, adv, _ = tagcn.forward(net, p, state=s, heads="adv")
        values[nx] = float(adv[1 * nx + 1])  # node (1,1): same 12-hop ball
    diff = abs(values[15] - values[45])
    assert diff <= 1e-10
    report(6, f"advantage at the shared-neighborhood node differs by "
              f"{diff:.2e} <= 1e-10 between 15x15 and 45x45")


# ------------------------------------------------------------- criterion 7

@pytest.mark.slow
def test_criterion_7_linear_scaling():
    net = tagcn.init_network(777)
    rows = evaluate.measure_scaling([1_000, 10_000, 100_000], net,
                                    theta=THETA, mean_size=400, cycles=1000,
                                    seed=77)
    # timing bound binds the two large sizes
    per_node = [r["seconds_per_node"] for r in rows[1:]]
    ratio = max(per_node) / min(per_node)
    assert ratio <= 3.0, rows

    ops_per_sweep_per_node = [r["matvec_ops_per_sweep"] / r["n"]
                              for r in rows[1:]]
    lin = max(ops_per_sweep_per_node) / min(ops_per_sweep_per_node)
    assert lin <= 1.05, rows

    # sweep count stays n-independent for fixed mean subdomain size
    sweeps = [r["sweeps"] for r in rows]
    assert max(sweeps) / min(sweeps) <= 2.0, sweeps
    report(7, f"per-node time ratio {ratio:.2f} <= 3, per-sweep matvec ops "
              f"linear within {100 * (lin - 1):.2f}% <= 5%, sweep counts "
              f"{sweeps} within 2x across 1e3..1e5")


# ------------------------------------------------------------- criterion 8

def _grid_f_fractions(net, sizes):
    out = {}
    for nx in sizes:
        p = problems.fd_poisson_structured(nx, nx)
        rl = evaluate.evaluate_coarsen(net, p, THETA, seed=8)[0]
        gr = greedy.greedy_coarsen(p, THETA)
        out[nx] = (metrics.f_fraction(rl), metrics.f_fraction(gr))
    return out


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("AMGCOARSEN_ACCEPT_TRAIN_SMOKE"),
                    reason="~15 min training; set AMGCOARSEN_ACCEPT_TRAIN_SMOKE=1")
def test_criterion_8_smoke_training_non_degradation():
    cfg = dqn.TrainerConfig(episodes=500, seed=20240601)
    _, log = dqn.train(cfg)
    first = np.median([r["f_fraction"] for r in log.rows[:50]])
    last = np.median([r["f_fraction"] for r in log.rows[-50:]])
    assert last >= first, (first, last)
    report(8, f"500-episode smoke: median F-fraction first 50 = {first:.4f}, "
              f"last 50 = {last:.4f} (non-degradation)")


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("AMGCOARSEN_ACCEPT_TRAIN_FULL"),
                    reason="hours-long; set AMGCOARSEN_ACCEPT_TRAIN_FULL=1")
def test_criterion_8_full_training_beats_greedy():
    cfg = dqn.TrainerConfig(seed=20240601)  # published defaults, 10k episodes
    net, _ = dqn.train(cfg)
    results = _grid_f_fractions(net, (64, 96))
    for nx, (rl_ff, greedy_ff) in results.items():
        assert rl_ff >= greedy_ff + 0.10, (nx, rl_ff, greedy_ff)
    report(8, f"trained agent beats greedy by >= 10 points: {results}")


# ------------------------------------------------------------- criterion 9

def test_criterion_9_baseline_sanity():
    state3 = greedy.greedy_coarsen(problems.fd_poisson_structured(3, 3), THETA)
    assert state3.n_coarse == 1
    assert state3.coarse_nodes().tolist() == [4]

    p = problems.fd_poisson_structured(100, 100)
    state = greedy.greedy_coarsen(p, THETA)
    assert env.check_constraint(state)
    ff = metrics.f_fraction(state)
    bound = metrics.structured_upper_bound(100, 100)
    assert ff < bound
    report(9, f"greedy optimal on 3x3; greedy on 100x100 feasible with "
              f"F-fraction {ff:.4f} < bound {bound:.4f}")
