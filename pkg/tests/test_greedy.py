import numpy as np
import pytest

from amgcoarsen import env, greedy, mesh, metrics, problems, sparse
from amgcoarsen.errors import ContractViolationError


def test_3x3_coarsens_center_only():
    p = problems.fd_poisson_structured(3, 3)
    state = greedy.greedy_coarsen(p, 0.56)
    assert state.coarse_nodes().tolist() == [4]
    assert env.check_constraint(state)


def test_2x2_no_coarsening():
    state = greedy.greedy_coarsen(problems.fd_poisson_structured(2, 2), 0.56)
    assert state.n_coarse == 0
    assert metrics.f_fraction(state) == 1.0


def test_1x1_terminal_at_reset():
    state = greedy.greedy_coarsen(problems.fd_poisson_structured(1, 1), 0.56)
    assert state.n_coarse == 0


def test_priorities_hand_values():
    p = problems.fd_poisson_structured(3, 3)
    s = env.reset(p, 0.56)
    assert greedy.greedy_priority(s, 4) == pytest.approx(0.5)    # 4/8
    assert greedy.greedy_priority(s, 0) == pytest.approx(2 / 3)  # 4/6
    assert greedy.greedy_priority(s, 1) == pytest.approx(4 / 7)


def test_priority_isolated_node():
    m = sparse.from_dense(np.diag([4.0, 4.0]))
    p = problems.ProblemInstance(matrix=m)
    s = env.reset(p, 0.56)
    assert greedy.greedy_priority(s, 0) == 1.0


def test_priority_on_coarse_node_is_contract_violation():
    p = problems.fd_poisson_structured(3, 3)
    s = env.reset(p, 0.56)
    env.step(s, 4)
    with pytest.raises(ContractViolationError):
        greedy.greedy_priority(s, 4)


def test_output_feasible_on_grids_and_meshes():
    cases = [problems.fd_poisson_structured(10, 10),
             problems.fd_poisson_structured(17, 5)]
    for seed in (0, 1):
        cases.append(problems.fem_p1_laplacian(
            mesh.random_convex_mesh(8, (60, 120), seed=seed)))
    for p in cases:
        state = greedy.greedy_coarsen(p, 0.56)
        assert env.check_constraint(state)
        fsum, v = env.recompute_violations(state)
        assert v.sum() == 0


def test_candidate_modes_identical():
    cases = [problems.fd_poisson_structured(10, 10),
             problems.fem_p1_laplacian(
                 mesh.random_convex_mesh(8, (60, 120), seed=5))]
    for p in cases:
        a = greedy.greedy_coarsen(p, 0.56, mode="violating")
        b = greedy.greedy_coarsen(p, 0.56, mode="all-fine")
        assert np.array_equal(a.f, b.f)


def test_matches_naive_reference(rng):
    """Heap + lazy invalidation vs a from-scratch argmin every step."""
    for seed in (11, 12, 13):
        p = problems.fem_p1_laplacian(
            mesh.random_convex_mesh(7, (30, 60), seed=seed))
        fast = greedy.greedy_coarsen(p, 0.56)

        state = env.reset(p, 0.56)
        order = []
        while state.n_violating > 0:
            cand = env.actions(state)
            ratios = state.absdiag[cand] / state.fsum[cand]
            pick = int(cand[np.lexsort((cand, ratios))[0]])
            env.step(state, pick)
            order.append(pick)
        assert np.array_equal(fast.f, state.f)


def test_record_trace():
    p = problems.fd_poisson_structured(6, 6)
    record = env.EpisodeRecord()
    state = greedy.greedy_coarsen(p, 0.56, record=record)
    assert len(record.actions) == state.n_coarse
    assert record.rewards == [-float(k) for k in range(1, state.n_coarse + 1)]
    assert record.f_fraction == metrics.f_fraction(state)
