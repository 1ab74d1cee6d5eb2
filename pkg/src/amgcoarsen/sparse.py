"""Sparse symmetric CSR matrix and graph primitives.

Conventions enforced throughout the package:

* CSR with int64 indices and float64 values, column indices sorted per row.
* Operator (square) matrices are structurally symmetric, store an explicit
  diagonal entry in every row, and store no explicit zeros off the diagonal.
* Rectangular matrices (interpolation operators) reuse the same container
  with independent row/column counts and no diagonal requirement.
* All instances are immutable after construction; row-ascending summation
  keeps repeated evaluations bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import backend
from .errors import InputError


@dataclass(frozen=True)
class SparseMatrix:
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _diag_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return self.n_rows

    @property
    def nnz(self):
        return int(self.col_idx.shape[0])

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def row(self, i):
        """(columns, values) of row i."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def diagonal(self):
        """Dense diagonal vector (cached). Square matrices only."""
        if "diag" not in self._diag_cache:
            if self.n_rows != self.n_cols:
                raise InputError("diagonal requested for a rectangular matrix")
            self._diag_cache["diag"] = self.to_scipy().diagonal()
        return self._diag_cache["diag"]

    def to_scipy(self):
        return sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=self.shape
        )

    def to_dense(self):
        return self.to_scipy().toarray()

    def transpose(self):
        return from_scipy(self.to_scipy().T.tocsr(), square_cleanup=False)


def from_coo(n_rows, n_cols, rows, cols, vals, ensure_diagonal=False):
    """Build a SparseMatrix from COO triplets.

    Duplicate entries are summed; exact-zero off-diagonals are dropped;
    column indices are sorted. With ensure_diagonal, rows missing a diagonal
    entry get an explicit zero there (square matrices only).
    """
    m = sp.coo_matrix(
        (np.asarray(vals, dtype=np.float64),
         (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n_rows, n_cols),
    ).tocsr()
    m.sum_duplicates()
    return from_scipy(m, square_cleanup=(n_rows == n_cols and ensure_diagonal))


def from_scipy(m, square_cleanup=True):
    """Wrap a scipy sparse matrix, normalizing to package conventions."""
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    if square_cleanup and m.shape[0] == m.shape[1]:
        # drop explicit off-diagonal zeros, force an explicit diagonal entry
        # in every row (scipy's add/eliminate helpers prune zero diagonals,
        # so the result is reassembled from COO parts)
        n = m.shape[0]
        diag = m.diagonal()
        coo = m.tocoo()
        off = coo.row != coo.col
        keep = off & (coo.data != 0.0)
        rows = np.concatenate([coo.row[keep], np.arange(n)])
        cols = np.concatenate([coo.col[keep], np.arange(n)])
        data = np.concatenate([coo.data[keep], diag])
        m = sp.csr_matrix(
            sp.coo_matrix((data, (rows, cols)), shape=m.shape)
        )
    m.sort_indices()
    return SparseMatrix(
        n_rows=m.shape[0],
        n_cols=m.shape[1],
        row_ptr=np.asarray(m.indptr, dtype=np.int64),
        col_idx=np.asarray(m.indices, dtype=np.int64),
        values=np.asarray(m.data, dtype=np.float64),
    )


def from_dense(a):
    a = np.asarray(a, dtype=np.float64)
    return from_scipy(sp.csr_matrix(a))


def identity(n):
    return from_scipy(sp.identity(n, format="csr"))


def validate_operator(m):
    """Check the square-operator invariants; raises InputError on violation."""
    if m.n_rows != m.n_cols:
        raise InputError("operator matrix must be square")
    if np.any(np.diff(m.row_ptr) < 0):
        raise InputError("row_ptr must be monotone non-decreasing")
    for i in range(m.n_rows):
        cols, vals = m.row(i)
        if np.any(np.diff(cols) <= 0):
            raise InputError(f"row {i}: column indices not strictly increasing")
        k = np.searchsorted(cols, i)
        if k >= cols.shape[0] or cols[k] != i:
            raise InputError(f"row {i}: missing diagonal entry")
        off = cols != i
        if np.any(vals[off] == 0.0):
            raise InputError(f"row {i}: explicit zero off-diagonal")
    if not is_structurally_symmetric(m):
        raise InputError("matrix structure is not symmetric")
    return True


def is_structurally_symmetric(m):
    s = (m.to_scipy() != 0).astype(int)
    return (s != s.T).nnz == 0


def matvec(m, x):
    """Sparse matrix-vector product m @ x.

    Row entries are accumulated in ascending column order, so repeated calls
    are bit-identical.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.n_cols,):
        raise InputError(f"matvec: x has shape {x.shape}, expected ({m.n_cols},)")
    out = np.empty(m.n_rows)
    backend.csr_matvec(m.row_ptr, m.col_idx, m.values, x, out)
    return out


def galerkin_product(a, p):
    """Coarse operator P^T A P with symmetric sparsity.

    a : (n, n) operator matrix, p : (n, n_c) interpolation. The product is
    formed with scipy sparse matmul and symmetrized to remove last-ulp
    structural asymmetry; an explicit diagonal is kept in every row.
    """
    if a.n_rows != a.n_cols:
        raise InputError("galerkin_product: A must be square")
    if p.n_rows != a.n_cols:
        raise InputError(
            f"galerkin_product: P has {p.n_rows} rows, expected {a.n_cols}"
        )
    if p.n_cols > a.n_rows:
        raise InputError("galerkin_product: P has more columns than rows")
    ps = p.to_scipy()
    ac = ps.T @ (a.to_scipy() @ ps)
    ac = (ac + ac.T) * 0.5
    return from_scipy(ac.tocsr())


def row_abs_sum(m, i, mask):
    """Sum of |a_ij| over stored entries of row i whose column j is in mask.

    The diagonal term participates whenever mask[i] holds; this is the row
    sum behind the dominance constraint and the greedy priority.
    """
    if not (0 <= i < m.n_rows):
        raise InputError(f"row index {i} out of range")
    mask = np.asarray(mask, dtype=bool)
    cols, vals = m.row(i)
    return float(np.abs(vals)[mask[cols]].sum())


@dataclass(frozen=True)
class Graph:
    """Adjacency view of an operator matrix: CSR pattern of the off-diagonal
    nonzeros with the matching edge weights (weight(i,j) = a_ij)."""

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    edge_weight: np.ndarray

    @property
    def n_edges(self):
        return int(self.col_idx.shape[0]) // 2

    def neighbors(self, i):
        return self.col_idx[self.row_ptr[i]:self.row_ptr[i + 1]]


def graph_from_matrix(m):
    """Strip the diagonal of an operator matrix, keeping the symmetric
    off-diagonal pattern as an undirected graph."""
    if m.n_rows != m.n_cols:
        raise InputError("graph extraction needs a square matrix")
    row_of = np.repeat(np.arange(m.n_rows, dtype=np.int64), np.diff(m.row_ptr))
    off_mask = m.col_idx != row_of
    counts = np.bincount(row_of[off_mask], minlength=m.n_rows)
    new_ptr = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=new_ptr[1:])
    return Graph(
        n=m.n_rows,
        row_ptr=new_ptr,
        col_idx=m.col_idx[off_mask],
        edge_weight=m.values[off_mask],
    )
