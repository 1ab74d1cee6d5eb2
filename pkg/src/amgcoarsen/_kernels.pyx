# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: CSR matvec, Gauss-Seidel, dominance-flag updates,
subdomain sweeps and BFS aggregation. A numpy fallback with identical
semantics lives in _kernels_py; amgcoarsen.backend picks one at import."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t
ctypedef cnp.float64_t val_t
ctypedef cnp.uint8_t flag_t


def csr_matvec(idx_t[::1] rp, idx_t[::1] col, val_t[::1] val,
               val_t[::1] x, val_t[::1] out):
    cdef Py_ssize_t i, k
    cdef val_t acc
    for i in range(out.shape[0]):
        acc = 0.0
        for k in range(rp[i], rp[i + 1]):
            acc += val[k] * x[col[k]]
        out[i] = acc


def gauss_seidel_sweeps(idx_t[::1] rp, idx_t[::1] col, val_t[::1] val,
                        val_t[::1] x, val_t[::1] b, Py_ssize_t sweeps):
    cdef Py_ssize_t i, k, s, n = x.shape[0]
    cdef val_t acc, diag
    for s in range(sweeps):
        for i in range(n):
            acc = 0.0
            diag = 0.0
            for k in range(rp[i], rp[i + 1]):
                if col[k] == i:
                    diag = val[k]
                else:
                    acc += val[k] * x[col[k]]
            x[i] = (b[i] - acc) / diag


def masked_row_abs_sums(idx_t[::1] rp, idx_t[::1] col, val_t[::1] absval,
                        flag_t[::1] mask, val_t[::1] out):
    cdef Py_ssize_t i, k
    cdef val_t acc
    for i in range(out.shape[0]):
        acc = 0.0
        for k in range(rp[i], rp[i + 1]):
            if mask[col[k]]:
                acc += absval[k]
        out[i] = acc


cdef inline val_t _masked_sum_row(idx_t[::1] rp, idx_t[::1] col,
                                  val_t[::1] absval, flag_t[::1] mask,
                                  Py_ssize_t i) noexcept:
    cdef Py_ssize_t k
    cdef val_t acc = 0.0
    for k in range(rp[i], rp[i + 1]):
        if mask[col[k]]:
            acc += absval[k]
    return acc


def recompute_masked_sums(idx_t[::1] rp, idx_t[::1] col, val_t[::1] absval,
                          flag_t[::1] mask, idx_t[::1] rows, val_t[::1] out):
    cdef Py_ssize_t r
    for r in range(rows.shape[0]):
        out[rows[r]] = _masked_sum_row(rp, col, absval, mask, rows[r])


cdef inline Py_ssize_t _coarsen_node(idx_t[::1] rp, idx_t[::1] col,
                                     val_t[::1] absval, val_t[::1] absdiag,
                                     val_t theta, flag_t[::1] f, flag_t[::1] v,
                                     val_t[::1] fsum, Py_ssize_t node) noexcept:
    # Flip node to coarse, re-derive the F-restricted row sums for node and
    # its neighbours from scratch (no drift vs. a full recomputation), and
    # refresh their violation flags. Returns the change in violation count.
    cdef Py_ssize_t k, j, dviol = 0
    cdef flag_t newv
    if v[node]:
        dviol -= 1
    f[node] = 0
    v[node] = 0
    for k in range(rp[node], rp[node + 1]):
        j = col[k]
        fsum[j] = _masked_sum_row(rp, col, absval, f, j)
        if j == node or not f[j]:
            continue
        newv = 1 if absdiag[j] < theta * fsum[j] else 0
        dviol += <Py_ssize_t> newv - <Py_ssize_t> v[j]
        v[j] = newv
    return dviol


def coarsen_node(idx_t[::1] rp, idx_t[::1] col, val_t[::1] absval,
                 val_t[::1] absdiag, double theta, flag_t[::1] f,
                 flag_t[::1] v, val_t[::1] fsum, Py_ssize_t node):
    return _coarsen_node(rp, col, absval, absdiag, theta, f, v, fsum, node)


def evaluate_sweep(idx_t[::1] rp, idx_t[::1] col, val_t[::1] absval,
                   val_t[::1] absdiag, double theta, flag_t[::1] f,
                   flag_t[::1] v, val_t[::1] fsum, val_t[::1] adv,
                   idx_t[::1] sub_ptr, idx_t[::1] sub_nodes):
    # One pass of the per-subdomain coarsening sweep: in ascending subdomain
    # order pick the violating node with the largest advantage (ties: lowest
    # node index via ascending scan) and coarsen it, refreshing flags before
    # the next subdomain is examined.
    cdef Py_ssize_t k, p, i, best, picked = 0, dviol = 0
    cdef val_t best_adv = 0.0
    for k in range(sub_ptr.shape[0] - 1):
        best = -1
        for p in range(sub_ptr[k], sub_ptr[k + 1]):
            i = sub_nodes[p]
            if v[i] and (best < 0 or adv[i] > best_adv):
                best = i
                best_adv = adv[i]
        if best >= 0:
            dviol += _coarsen_node(rp, col, absval, absdiag, theta,
                                   f, v, fsum, best)
            picked += 1
    return picked, dviol


def bfs_assign(idx_t[::1] rp, idx_t[::1] col, idx_t[::1] centers,
               idx_t[::1] dist, idx_t[::1] owner):
    # Multi-source unit-weight BFS on the (diagonal-free) adjacency. dist is
    # filled with hop counts from the nearest center; owner with the index of
    # that center, ties resolved to the lowest center index by a second pass
    # in visit order (parents are always finalized first).
    cdef Py_ssize_t n = dist.shape[0]
    cdef cnp.ndarray[idx_t, ndim=1] order_arr = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] order = order_arr
    cdef Py_ssize_t head = 0, tail = 0, c, u, w, k, q
    cdef idx_t best
    for u in range(n):
        dist[u] = -1
        owner[u] = -1
    for c in range(centers.shape[0]):
        u = centers[c]
        dist[u] = 0
        owner[u] = c
        order[tail] = u
        tail += 1
    while head < tail:
        u = order[head]
        head += 1
        for k in range(rp[u], rp[u + 1]):
            w = col[k]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                order[tail] = w
                tail += 1
    for q in range(tail):
        u = order[q]
        if dist[u] == 0:
            continue
        best = -1
        for k in range(rp[u], rp[u + 1]):
            w = col[k]
            if dist[w] == dist[u] - 1 and owner[w] >= 0:
                if best < 0 or owner[w] < best:
                    best = owner[w]
        owner[u] = best
    return tail


def subdomain_centers(idx_t[::1] rp, idx_t[::1] col, idx_t[::1] sub_ptr,
                      idx_t[::1] sub_nodes, idx_t[::1] assignment,
                      idx_t[::1] out_centers):
    # For each subdomain, BFS from every member (restricted to the subdomain)
    # and pick the node of minimal eccentricity; ascending member order makes
    # ties resolve to the lowest node index.
    cdef Py_ssize_t n = assignment.shape[0]
    cdef cnp.ndarray[idx_t, ndim=1] dist_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[idx_t, ndim=1] queue_arr = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] dist = dist_arr
    cdef idx_t[::1] queue = queue_arr
    cdef Py_ssize_t k, p, src, u, w, e, head, tail, q
    cdef idx_t kk, ecc, best_ecc
    cdef Py_ssize_t best_node
    for k in range(sub_ptr.shape[0] - 1):
        kk = <idx_t> k
        best_node = -1
        best_ecc = 0
        for p in range(sub_ptr[k], sub_ptr[k + 1]):
            src = sub_nodes[p]
            head = 0
            tail = 0
            dist[src] = 0
            queue[tail] = src
            tail += 1
            ecc = 0
            while head < tail:
                u = queue[head]
                head += 1
                if dist[u] > ecc:
                    ecc = dist[u]
                for e in range(rp[u], rp[u + 1]):
                    w = col[e]
                    if assignment[w] == kk and dist[w] < 0:
                        dist[w] = dist[u] + 1
                        queue[tail] = w
                        tail += 1
            for q in range(tail):
                dist[queue[q]] = -1
            if best_node < 0 or ecc < best_ecc:
                best_node = src
                best_ecc = ecc
        out_centers[k] = best_node
