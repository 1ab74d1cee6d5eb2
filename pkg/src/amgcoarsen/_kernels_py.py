"""Pure numpy/scipy fallback for the compiled kernels in _kernels.pyx.

Semantics match the Cython versions (same tie-breaking, same ascending
within-row summation where flags are derived from the sums); only speed
differs. Selected by amgcoarsen.backend when the extension is unavailable
or AMGCOARSEN_BACKEND=python is set.
"""

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


def _expand_rows(rp, col, rows):
    """Concatenated column indices of the given rows, plus segment lengths."""
    starts = rp[rows]
    lens = rp[rows + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=col.dtype), lens
    offs = np.repeat(starts, lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(lens) - lens, lens
    )
    return col[offs + within], lens


def csr_matvec(rp, col, val, x, out):
    n = out.shape[0]
    prods = val * x[col]
    row_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(rp))
    out[:] = np.bincount(row_of, weights=prods, minlength=n)


def gauss_seidel_sweeps(rp, col, val, x, b, sweeps):
    n = x.shape[0]
    rpl = rp.tolist()
    for _ in range(sweeps):
        for i in range(n):
            lo, hi = rpl[i], rpl[i + 1]
            cols = col[lo:hi]
            vals = val[lo:hi]
            dmask = cols == i
            diag = vals[dmask][0]
            acc = np.dot(vals[~dmask], x[cols[~dmask]])
            x[i] = (b[i] - acc) / diag


def masked_row_abs_sums(rp, col, absval, mask, out):
    n = out.shape[0]
    prods = absval * mask[col]
    row_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(rp))
    out[:] = np.bincount(row_of, weights=prods, minlength=n)


def recompute_masked_sums(rp, col, absval, mask, rows, out):
    # sequential ascending accumulation, matching masked_row_abs_sums (whose
    # bincount path adds masked-out terms as exact zeros) bit for bit
    for i in rows:
        acc = 0.0
        for k in range(rp[i], rp[i + 1]):
            if mask[col[k]]:
                acc += absval[k]
        out[i] = acc


def coarsen_node(rp, col, absval, absdiag, theta, f, v, fsum, node):
    dviol = -int(v[node])
    f[node] = 0
    v[node] = 0
    neighbors = col[rp[node]:rp[node + 1]]
    recompute_masked_sums(rp, col, absval, f, neighbors, fsum)
    for j in neighbors:
        if j == node or not f[j]:
            continue
        newv = 1 if absdiag[j] < theta * fsum[j] else 0
        dviol += newv - int(v[j])
        v[j] = newv
    return dviol


def evaluate_sweep(rp, col, absval, absdiag, theta, f, v, fsum, adv,
                   sub_ptr, sub_nodes):
    picked = 0
    dviol = 0
    for k in range(sub_ptr.shape[0] - 1):
        members = sub_nodes[sub_ptr[k]:sub_ptr[k + 1]]
        cand = members[v[members] == 1]
        if cand.size == 0:
            continue
        # members ascend, argmax returns the first maximum: lowest index wins
        best = cand[np.argmax(adv[cand])]
        dviol += coarsen_node(rp, col, absval, absdiag, theta, f, v, fsum,
                              int(best))
        picked += 1
    return picked, dviol


def bfs_assign(rp, col, centers, dist, owner):
    n = dist.shape[0]
    dist[:] = -1
    owner[:] = -1
    dist[centers] = 0
    owner[centers] = np.arange(centers.shape[0], dtype=np.int64)
    levels = [centers.astype(np.int64)]
    frontier = levels[0]
    d = 0
    reached = frontier.shape[0]
    while frontier.size:
        d += 1
        nbrs, _ = _expand_rows(rp, col, frontier)
        fresh = np.unique(nbrs[dist[nbrs] < 0])
        dist[fresh] = d
        reached += fresh.shape[0]
        levels.append(fresh)
        frontier = fresh
    big = np.int64(np.iinfo(np.int64).max)
    for d in range(1, len(levels)):
        level = levels[d]
        if level.size == 0:
            continue
        nbrs, lens = _expand_rows(rp, col, level)
        cand = np.where(dist[nbrs] == d - 1, owner[nbrs], big)
        starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
        owner[level] = np.minimum.reduceat(cand, starts)
    return reached


def subdomain_centers(rp, col, sub_ptr, sub_nodes, assignment, out_centers):
    n = assignment.shape[0]
    nnz = col.shape[0]
    adj = csr_matrix((np.ones(nnz), col, rp), shape=(n, n))
    for k in range(sub_ptr.shape[0] - 1):
        members = sub_nodes[sub_ptr[k]:sub_ptr[k + 1]]
        sub = adj[members][:, members]
        d = shortest_path(sub, method="D", directed=False, unweighted=True)
        ecc = d.max(axis=1)
        out_centers[k] = members[int(np.argmin(ecc))]
