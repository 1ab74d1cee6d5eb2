"""Graph network with polynomial propagation filters and dueling heads.

Each layer applies, per output channel, a degree-J polynomial in the
propagation matrix M to every input channel and sums the results plus a
bias: y = sum_l sum_j g[l,j] M^j x_l + b. Powers of M are never formed;
a hop stack of J sparse matvecs per input channel is built instead, so one
full evaluation costs exactly J * (2 + hidden + hidden) matvecs regardless
of node count (the two heads share the stack of their common input).

Architecture: two shared layers with rectified-linear activations feeding a
linear per-node advantage head and a linear value head reduced by a node
mean. The scalar value plus the per-node advantage gives the action value;
an optional mean-subtracted combination is available for ablation.

All arithmetic is float64; reverse-mode gradients are exact (checked against
finite differences in the tests).
"""

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from . import sparse
from .errors import FileFormatError, InputError

WEIGHT_MAGIC = b"AGCW"
WEIGHT_FORMAT_VERSION = 1


@dataclass
class TagcnLayer:
    g: np.ndarray  # (n_in, hops+1, n_out) polynomial coefficients
    b: np.ndarray  # (n_out,)

    @property
    def n_in(self):
        return self.g.shape[0]

    @property
    def hops(self):
        return self.g.shape[1] - 1

    @property
    def n_out(self):
        return self.g.shape[2]

    def copy(self):
        return TagcnLayer(g=self.g.copy(), b=self.b.copy())


@dataclass
class AgentNetwork:
    shared1: TagcnLayer
    shared2: TagcnLayer
    value_head: TagcnLayer
    advantage_head: TagcnLayer
    nonlinearity: str = "relu"
    dueling_mode: str = "sum"  # "sum" or "mean-sub"
    rng_seed: int = 0

    def layers(self):
        return [("shared1", self.shared1), ("shared2", self.shared2),
                ("value_head", self.value_head),
                ("advantage_head", self.advantage_head)]

    def receptive_hops(self):
        """Hops of influence along any input-to-head path (3 layers deep)."""
        return self.shared1.hops + self.shared2.hops + self.advantage_head.hops

    def copy(self):
        return replace(
            self,
            shared1=self.shared1.copy(), shared2=self.shared2.copy(),
            value_head=self.value_head.copy(),
            advantage_head=self.advantage_head.copy(),
        )


def init_network(seed, hidden=32, hops=4, n_features=2, dueling_mode="sum"):
    """Uniform fan-in initialization, deterministic in seed."""
    rng = np.random.default_rng(seed)

    def layer(n_in, n_out):
        bound = 1.0 / np.sqrt(n_in * (hops + 1))
        return TagcnLayer(
            g=rng.uniform(-bound, bound, size=(n_in, hops + 1, n_out)),
            b=np.zeros(n_out),
        )

    return AgentNetwork(
        shared1=layer(n_features, hidden),
        shared2=layer(hidden, hidden),
        value_head=layer(hidden, 1),
        advantage_head=layer(hidden, 1),
        dueling_mode=dueling_mode,
        rng_seed=int(seed),
    )


def build_propagation_matrix(problem):
    """Symmetric degree-normalized propagation matrix.

    M_ij = |a_ij| / sqrt(d_i d_j) for stored off-diagonals, d_i the absolute
    off-diagonal row sum; the diagonal is explicit zero. Isolated rows stay
    zero. Sparsity matches the operator, so the spectral radius is bounded
    by 1 and deep polynomial filters stay stable.
    """
    m = problem.matrix
    row_of = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.row_ptr))
    off = m.col_idx != row_of
    absv = np.abs(m.values)
    d = np.bincount(row_of[off], weights=absv[off], minlength=m.n)
    with np.errstate(divide="ignore"):
        scale = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    vals = np.where(off, absv * scale[row_of] * scale[m.col_idx], 0.0)
    return sparse.SparseMatrix(
        n_rows=m.n, n_cols=m.n,
        row_ptr=m.row_ptr, col_idx=m.col_idx, values=vals,
    )


def hop_stack(prop, x, hops):
    """H[l, j] = M^j x_l for j = 0..hops; built with hops matvecs per
    input channel."""
    n, n_in = x.shape
    out = np.empty((n_in, hops + 1, n))
    for l in range(n_in):
        p = np.ascontiguousarray(x[:, l])
        out[l, 0] = p
        for j in range(1, hops + 1):
            p = sparse.matvec(prop, p)
            out[l, j] = p
    return out


def layer_contract(layer, stack):
    """y[n, o] = sum_{l,j} H[l,j,n] g[l,j,o] + b[o]."""
    return np.tensordot(stack, layer.g, axes=([0, 1], [0, 1])) + layer.b


def tagcn_layer_forward(layer, prop, x):
    """Standalone layer evaluation (used directly by tests)."""
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != layer.n_in:
        raise InputError(
            f"layer expects {layer.n_in} input channels, got {x.shape[1]}"
        )
    return layer_contract(layer, hop_stack(prop, x, layer.hops))


def state_features(state):
    """Node features: (f_i, v_i) as reals."""
    return np.stack([state.f, state.v], axis=1).astype(np.float64)


def forward(net, problem, state=None, features=None, prop=None, heads="both",
            tape=None):
    """Evaluate the network.

    Returns (value, advantage, q). heads="adv" skips the value head and
    returns (None, advantage, None); useful at inference where only the
    advantage ordering matters. Passing a prebuilt propagation matrix avoids
    rebuilding it per call; tape (a dict) records intermediates for backward.
    """
    if features is None:
        if state is None:
            raise InputError("forward needs a state or explicit features")
        features = state_features(state)
    if prop is None:
        prop = build_propagation_matrix(problem)
    if features.shape != (prop.n, net.shared1.n_in):
        raise InputError(
            f"features shape {features.shape} does not match "
            f"({prop.n}, {net.shared1.n_in})"
        )

    h0 = hop_stack(prop, features, net.shared1.hops)
    z1 = layer_contract(net.shared1, h0)
    x1 = np.maximum(z1, 0.0)
    h1 = hop_stack(prop, x1, net.shared2.hops)
    z2 = layer_contract(net.shared2, h1)
    x2 = np.maximum(z2, 0.0)
    h2 = hop_stack(prop, x2, net.advantage_head.hops)
    adv = layer_contract(net.advantage_head, h2)[:, 0]

    if tape is not None:
        tape.update(prop=prop, h0=h0, z1=z1, h1=h1, z2=z2, h2=h2,
                    n=prop.n)

    if heads == "adv":
        return None, adv, None
    vnode = layer_contract(net.value_head, h2)[:, 0]
    value = float(vnode.mean())
    if net.dueling_mode == "sum":
        q = value + adv
    elif net.dueling_mode == "mean-sub":
        q = value + adv - adv.mean()
    else:
        raise InputError(f"unknown dueling mode {net.dueling_mode!r}")
    return value, adv, q


def zero_gradients(net):
    return {name: (np.zeros_like(layer.g), np.zeros_like(layer.b))
            for name, layer in net.layers()}


def backward(net, tape, dq, grads):
    """Accumulate d(loss)/d(weights) into grads for upstream gradient dq on
    the per-node action values of a prior taped forward."""
    n = tape["n"]
    prop = tape["prop"]
    dq = np.asarray(dq, dtype=np.float64)
    if net.dueling_mode == "sum":
        dadv = dq.copy()
    else:
        dadv = dq - dq.sum() / n
    dvnode = np.full(n, dq.sum() / n)

    dh2 = _layer_backward(net.advantage_head, tape["h2"], dadv[:, None],
                          grads["advantage_head"])
    dh2 += _layer_backward(net.value_head, tape["h2"], dvnode[:, None],
                           grads["value_head"])
    dx2 = _hop_backward(prop, dh2)
    dz2 = dx2 * (tape["z2"] > 0.0)
    dh1 = _layer_backward(net.shared2, tape["h1"], dz2, grads["shared2"])
    dx1 = _hop_backward(prop, dh1)
    dz1 = dx1 * (tape["z1"] > 0.0)
    _layer_backward(net.shared1, tape["h0"], dz1, grads["shared1"])


def _layer_backward(layer, stack, dz, grad_pair):
    dg, db = grad_pair
    dg += np.tensordot(stack, dz, axes=([2], [0]))
    db += dz.sum(axis=0)
    return np.tensordot(layer.g, dz, axes=([2], [1]))  # (l, j, n)


def _hop_backward(prop, dstack):
    """Adjoint of hop_stack for symmetric M, by Horner evaluation:
    dx_l = sum_j M^j dH[l,j]."""
    n_in, jp1, n = dstack.shape
    out = np.empty((n, n_in))
    for l in range(n_in):
        t = dstack[l, jp1 - 1].copy()
        for j in range(jp1 - 2, -1, -1):
            t = sparse.matvec(prop, t) + dstack[l, j]
        out[:, l] = t
    return out


def expected_matvecs_per_forward(net):
    """Closed-form matvec count of one evaluation (heads share a stack)."""
    j = net.shared1.hops
    return j * (net.shared1.n_in + net.shared2.n_in + net.advantage_head.n_in)


# ---------------------------------------------------------------------------
# weight files: magic | u32 version | u64 header length | header JSON |
# packed float64 little-endian arrays in header order | sha256 of the above


def _header(net):
    return {
        "format_version": WEIGHT_FORMAT_VERSION,
        "rng_seed": net.rng_seed,
        "nonlinearity": net.nonlinearity,
        "dueling_mode": net.dueling_mode,
        "layer_specs": [
            {"name": name, "n_in": layer.n_in, "hops": layer.hops,
             "n_out": layer.n_out}
            for name, layer in net.layers()
        ],
    }


def save_weights(net, path):
    header = json.dumps(_header(net)).encode("utf-8")
    chunks = [WEIGHT_MAGIC,
              np.uint32(WEIGHT_FORMAT_VERSION).tobytes(),
              np.uint64(len(header)).tobytes(),
              header]
    for _, layer in net.layers():
        chunks.append(layer.g.astype("<f8").tobytes())
        chunks.append(layer.b.astype("<f8").tobytes())
    payload = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(hashlib.sha256(payload).digest())


def load_weights(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 4 + 8 + 32:
        raise FileFormatError("weight file truncated (checksum missing)", path)
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise FileFormatError("weight file checksum mismatch", path)
    if payload[:4] != WEIGHT_MAGIC:
        raise FileFormatError("not a weight file (bad magic)", path)
    version = int(np.frombuffer(payload[4:8], dtype=np.uint32)[0])
    if version != WEIGHT_FORMAT_VERSION:
        raise FileFormatError(
            f"weight format version {version} unsupported "
            f"(expected {WEIGHT_FORMAT_VERSION})", path)
    hlen = int(np.frombuffer(payload[8:16], dtype=np.uint64)[0])
    try:
        header = json.loads(payload[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FileFormatError("corrupt weight header", path)
    body = payload[16 + hlen:]
    layers = {}
    offset = 0
    for spec in header["layer_specs"]:
        gn = spec["n_in"] * (spec["hops"] + 1) * spec["n_out"]
        need = (gn + spec["n_out"]) * 8
        if offset + need > len(body):
            raise FileFormatError(
                f"shape mismatch in layer {spec['name']}: need {need} bytes, "
                f"{len(body) - offset} left", path)
        g = np.frombuffer(body[offset:offset + gn * 8], dtype="<f8").reshape(
            spec["n_in"], spec["hops"] + 1, spec["n_out"]).copy()
        offset += gn * 8
        b = np.frombuffer(body[offset:offset + spec["n_out"] * 8],
                          dtype="<f8").copy()
        offset += spec["n_out"] * 8
        layers[spec["name"]] = TagcnLayer(g=g, b=b)
    if offset != len(body):
        raise FileFormatError(
            f"{len(body) - offset} trailing bytes after declared layers", path)
    missing = {"shared1", "shared2", "value_head", "advantage_head"} \
        - set(layers)
    if missing:
        raise FileFormatError(f"missing layers {sorted(missing)}", path)
    return AgentNetwork(
        shared1=layers["shared1"], shared2=layers["shared2"],
        value_head=layers["value_head"],
        advantage_head=layers["advantage_head"],
        nonlinearity=header.get("nonlinearity", "relu"),
        dueling_mode=header.get("dueling_mode", "sum"),
        rng_seed=header.get("rng_seed", 0),
    )
