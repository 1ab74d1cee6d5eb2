import numpy as np
import pytest

from amgcoarsen import backend, env, problems, sparse, tagcn
from amgcoarsen.errors import FileFormatError


def test_propagation_two_node_graph():
    m = sparse.from_dense([[2.0, -1.0], [-1.0, 2.0]])
    p = problems.ProblemInstance(matrix=m)
    prop = tagcn.build_propagation_matrix(p)
    assert np.array_equal(prop.to_dense(), [[0.0, 1.0], [1.0, 0.0]])


def test_propagation_symmetric_zero_diagonal(rng):
    p = problems.fd_poisson_structured(4, 5)
    prop = tagcn.build_propagation_matrix(p)
    dense = prop.to_dense()
    assert np.array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0)


def test_propagation_vs_dense_normalization():
    p = problems.fd_poisson_structured(3, 3)
    a = np.abs(p.matrix.to_dense())
    np.fill_diagonal(a, 0.0)
    d = a.sum(axis=1)
    expect = a / np.sqrt(np.outer(d, d))
    got = tagcn.build_propagation_matrix(p).to_dense()
    assert np.abs(got - expect).max() <= 1e-14
    assert np.all(got.sum(axis=1) <= np.sqrt(4) + 1e-12)


def test_propagation_isolated_node():
    m = sparse.from_dense([[3.0, 0.0], [0.0, 2.0]])
    prop = tagcn.build_propagation_matrix(problems.ProblemInstance(matrix=m))
    assert np.array_equal(prop.to_dense(), np.zeros((2, 2)))


def test_layer_identity_filter():
    p = problems.fd_poisson_structured(3, 3)
    prop = tagcn.build_propagation_matrix(p)
    layer = tagcn.TagcnLayer(g=np.zeros((1, 5, 1)), b=np.zeros(1))
    layer.g[0, 0, 0] = 1.0
    x = np.arange(9.0)
    assert np.array_equal(tagcn.tagcn_layer_forward(layer, prop, x)[:, 0], x)


def test_layer_one_hop_shift():
    m = sparse.from_dense([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    prop = sparse.SparseMatrix(  # unit path adjacency with zero diagonal
        n_rows=3, n_cols=3, row_ptr=m.row_ptr, col_idx=m.col_idx,
        values=np.where(m.col_idx == np.repeat(np.arange(3), np.diff(m.row_ptr)),
                        0.0, 1.0))
    layer = tagcn.TagcnLayer(g=np.zeros((1, 5, 1)), b=np.zeros(1))
    layer.g[0, 1, 0] = 1.0
    y = tagcn.tagcn_layer_forward(layer, prop, np.array([1.0, 0.0, 0.0]))
    assert y[:, 0].tolist() == [0.0, 1.0, 0.0]


def test_layer_vs_dense_polynomial_oracle(rng):
    p = problems.fd_poisson_structured(4, 4)
    prop = tagcn.build_propagation_matrix(p)
    dense_m = prop.to_dense()
    layer = tagcn.TagcnLayer(g=rng.standard_normal((3, 5, 2)),
                             b=rng.standard_normal(2))
    x = rng.standard_normal((16, 3))
    got = tagcn.tagcn_layer_forward(layer, prop, x)
    expect = np.zeros((16, 2))
    for o in range(2):
        expect[:, o] = layer.b[o]
        for l in range(3):
            mp = np.eye(16)
            for j in range(5):
                expect[:, o] += layer.g[l, j, o] * (mp @ x[:, l])
                mp = dense_m @ mp
    assert np.abs(got - expect).max() <= 1e-12


def test_zero_network_outputs_zero():
    net = tagcn.init_network(0)
    for _, layer in net.layers():
        layer.g[:] = 0.0
        layer.b[:] = 0.0
    p = problems.fd_poisson_structured(4, 4)
    s = env.reset(p, 0.56)
    value, adv, q = tagcn.forward(net, p, state=s)
    assert value == 0.0
    assert np.all(adv == 0.0)
    assert np.all(q == 0.0)


def test_q_equals_v_plus_a(rng):
    net = tagcn.init_network(3)
    p = problems.fd_poisson_structured(5, 4)
    s = env.reset(p, 0.56)
    value, adv, q = tagcn.forward(net, p, state=s)
    assert np.abs(q - adv - value).max() <= 1e-15


def test_mean_sub_dueling_mode():
    net = tagcn.init_network(3, dueling_mode="mean-sub")
    p = problems.fd_poisson_structured(4, 4)
    s = env.reset(p, 0.56)
    value, adv, q = tagcn.forward(net, p, state=s)
    assert np.abs(q - (value + adv - adv.mean())).max() <= 1e-15


def test_advantage_locality_across_grid_sizes():
    """Node (1,1) sees identical surroundings inside 15x15 and 45x45 grids
    out to the network's 12-hop receptive field."""
    net = tagcn.init_network(99)
    assert net.receptive_hops() == 12
    advantages = {}
    for nx in (15, 45):
        p = problems.fd_poisson_structured(nx, nx)
        s = env.reset(p, 0.56)
        _, adv, _ = tagcn.forward(net, p, state=s, heads="adv")
        advantages[nx] = adv[1 * nx + 1]
    assert abs(advantages[15] - advantages[45]) <= 1e-10


def test_advantage_differs_outside_receptive_field():
    # the grid centers do NOT share a 12-hop neighborhood (boundary visible
    # at hop 7 in the 15x15 only): values must differ
    net = tagcn.init_network(99)
    p15 = problems.fd_poisson_structured(15, 15)
    p45 = problems.fd_poisson_structured(45, 45)
    _, a15, _ = tagcn.forward(net, p15, state=env.reset(p15, 0.56), heads="adv")
    _, a45, _ = tagcn.forward(net, p45, state=env.reset(p45, 0.56), heads="adv")
    assert abs(a15[7 * 15 + 7] - a45[22 * 45 + 22]) > 1e-10


def test_permutation_equivariance(rng):
    net = tagcn.init_network(17)
    p = problems.fd_poisson_structured(5, 5)
    s = env.reset(p, 0.56)
    value, adv, _ = tagcn.forward(net, p, state=s)

    perm = rng.permutation(25)
    dense = p.matrix.to_dense()[np.ix_(perm, perm)]
    p2 = problems.ProblemInstance(matrix=sparse.from_dense(dense))
    s2 = env.reset(p2, 0.56)
    assert np.array_equal(s2.f[np.arange(25)], s.f[perm])
    value2, adv2, _ = tagcn.forward(net, p2, state=s2)
    assert abs(value2 - value) <= 1e-12
    assert np.abs(adv2 - adv[perm]).max() <= 1e-12


def test_matvec_count_per_forward():
    net = tagcn.init_network(1)
    p = problems.fd_poisson_structured(9, 9)
    s = env.reset(p, 0.56)
    prop = tagcn.build_propagation_matrix(p)
    backend.reset_matvec_counters()
    tagcn.forward(net, p, state=s, prop=prop)
    calls, _ = backend.matvec_counters()
    assert calls == tagcn.expected_matvecs_per_forward(net)
    assert calls == 4 * (2 + 32 + 32)
    backend.reset_matvec_counters()
    tagcn.forward(net, p, state=s, prop=prop, heads="adv")
    calls_adv, _ = backend.matvec_counters()
    assert calls_adv == calls  # heads share the last hop stack


def _loss_for_gradcheck(net, p, s, target, action):
    _, _, q = tagcn.forward(net, p, state=s)
    e = q[action] - target
    return 0.5 * e * e if abs(e) <= 1 else abs(e) - 0.5


def test_gradients_match_finite_differences(rng):
    net = tagcn.init_network(7)
    p = problems.fd_poisson_structured(4, 4)
    s = env.reset(p, 0.56)
    action = int(env.actions(s)[0])
    target = -2.5

    tape = {}
    _, _, q = tagcn.forward(net, p, state=s, tape=tape)
    e = float(q[action] - target)
    slope = e if abs(e) <= 1 else np.sign(e)
    grads = tagcn.zero_gradients(net)
    dq = np.zeros(s.n)
    dq[action] = slope
    tagcn.backward(net, tape, dq, grads)

    h = 1e-5
    for name, layer in net.layers():
        for _ in range(4):
            idx = tuple(rng.integers(0, d) for d in layer.g.shape)
            orig = layer.g[idx]
            layer.g[idx] = orig + h
            up = _loss_for_gradcheck(net, p, s, target, action)
            layer.g[idx] = orig - h
            down = _loss_for_gradcheck(net, p, s, target, action)
            layer.g[idx] = orig
            fd = (up - down) / (2 * h)
            an = grads[name][0][idx]
            assert abs(fd - an) <= 1e-5 * max(1.0, abs(fd)), (name, idx)
        orig = layer.b[0]
        layer.b[0] = orig + h
        up = _loss_for_gradcheck(net, p, s, target, action)
        layer.b[0] = orig - h
        down = _loss_for_gradcheck(net, p, s, target, action)
        layer.b[0] = orig
        fd = (up - down) / (2 * h)
        assert abs(fd - grads[name][1][0]) <= 1e-5 * max(1.0, abs(fd))


def test_zero_upstream_gives_zero_gradients():
    net = tagcn.init_network(5)
    p = problems.fd_poisson_structured(3, 3)
    s = env.reset(p, 0.56)
    tape = {}
    tagcn.forward(net, p, state=s, tape=tape)
    grads = tagcn.zero_gradients(net)
    tagcn.backward(net, tape, np.zeros(9), grads)
    for dg, db in grads.values():
        assert np.all(dg == 0.0)
        assert np.all(db == 0.0)


def test_backward_is_additive():
    # accumulating the same upstream twice doubles every gradient (sum
    # reduction linearity)
    net = tagcn.init_network(5)
    p = problems.fd_poisson_structured(3, 3)
    s = env.reset(p, 0.56)
    tape = {}
    tagcn.forward(net, p, state=s, tape=tape)
    dq = np.zeros(9)
    dq[4] = 1.0
    once = tagcn.zero_gradients(net)
    tagcn.backward(net, tape, dq, once)
    twice = tagcn.zero_gradients(net)
    tagcn.backward(net, tape, dq, twice)
    tagcn.backward(net, tape, dq, twice)
    for name in once:
        assert np.allclose(twice[name][0], 2 * once[name][0], rtol=0, atol=0)
        assert np.allclose(twice[name][1], 2 * once[name][1], rtol=0, atol=0)


def test_save_load_round_trip_bitwise(tmp_path):
    net = tagcn.init_network(23)
    p = problems.fd_poisson_structured(5, 5)
    s = env.reset(p, 0.56)
    v0, a0, q0 = tagcn.forward(net, p, state=s)
    path = tmp_path / "w.agcw"
    tagcn.save_weights(net, path)
    loaded = tagcn.load_weights(path)
    v1, a1, q1 = tagcn.forward(loaded, p, state=s)
    assert v0 == v1
    assert np.array_equal(a0, a1)
    assert np.array_equal(q0, q1)


def test_truncated_weight_file(tmp_path):
    net = tagcn.init_network(23)
    path = tmp_path / "w.agcw"
    tagcn.save_weights(net, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-40])
    with pytest.raises(FileFormatError):
        tagcn.load_weights(path)


def test_mismatched_layer_sizes_named(tmp_path):
    net = tagcn.init_network(23)
    path = tmp_path / "w.agcw"
    tagcn.save_weights(net, path)
    blob = bytearray(path.read_bytes())
    # shrink the declared output width of shared2 in the header
    idx = blob.find(b'"shared2", "n_in": 32, "hops": 4, "n_out": 32')
    assert idx > 0
    fixed = blob.replace(b'"shared2", "n_in": 32, "hops": 4, "n_out": 32',
                         b'"shared2", "n_in": 32, "hops": 4, "n_out": 99')
    import hashlib
    payload = bytes(fixed[:-32])
    path.write_bytes(payload + hashlib.sha256(payload).digest())
    with pytest.raises(FileFormatError) as err:
        tagcn.load_weights(path)
    assert "shared2" in str(err.value) or "advantage_head" in str(err.value)
