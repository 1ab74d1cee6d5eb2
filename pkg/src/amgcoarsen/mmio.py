"""Matrix Market coordinate I/O.

Supports `matrix coordinate real general` and `... symmetric` headers,
1-based indices on the wire, 0-based in memory. Symmetric files store the
lower triangle; the reader mirrors it. Parse failures report the offending
line number.
"""

import numpy as np

from . import sparse
from .errors import FileFormatError, InputError


def read_matrix_market(path):
    """Read a `.mtx` coordinate file into a SparseMatrix."""
    with open(path, "r") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise FileFormatError("missing %%MatrixMarket banner", path, 1)
        fields = header.strip().split()
        if len(fields) < 5 or fields[1] != "matrix" or fields[2] != "coordinate":
            raise FileFormatError(f"unsupported header {header.strip()!r}", path, 1)
        value_type, symmetry = fields[3], fields[4]
        if value_type not in ("real", "integer"):
            raise FileFormatError(f"unsupported value type {value_type!r}", path, 1)
        if symmetry not in ("general", "symmetric"):
            raise FileFormatError(f"unsupported symmetry {symmetry!r}", path, 1)

        lineno = 1
        size_line = None
        for line in fh:
            lineno += 1
            if line.startswith("%") or not line.strip():
                continue
            size_line = line
            break
        if size_line is None:
            raise FileFormatError("missing size line", path, lineno)
        try:
            n_rows, n_cols, nnz = (int(t) for t in size_line.split())
        except ValueError:
            raise FileFormatError(f"bad size line {size_line.strip()!r}", path, lineno)

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in fh:
            lineno += 1
            if line.startswith("%") or not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FileFormatError(f"expected 'i j value', got {line.strip()!r}",
                                      path, lineno)
            if k >= nnz:
                raise FileFormatError("more entries than declared", path, lineno)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise FileFormatError(f"unparseable entry {line.strip()!r}",
                                      path, lineno)
            if not (1 <= i <= n_rows and 1 <= j <= n_cols):
                raise FileFormatError(f"index ({i},{j}) out of range", path, lineno)
            rows[k], cols[k], vals[k] = i - 1, j - 1, v
            k += 1
        if k != nnz:
            raise FileFormatError(f"declared {nnz} entries, found {k}", path, lineno)

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    m = sparse.from_coo(n_rows, n_cols, rows, cols, vals,
                        ensure_diagonal=(n_rows == n_cols))
    if n_rows == n_cols and not sparse.is_structurally_symmetric(m):
        raise InputError(f"{path}: matrix structure is not symmetric")
    return m


def write_matrix_market(path, m, symmetric=True):
    """Write a SparseMatrix as `.mtx`; symmetric output stores the lower
    triangle only (square matrices)."""
    if symmetric and m.n_rows != m.n_cols:
        symmetric = False
    kind = "symmetric" if symmetric else "general"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        row_of = np.repeat(np.arange(m.n_rows, dtype=np.int64), np.diff(m.row_ptr))
        cols = m.col_idx
        vals = m.values
        if symmetric:
            keep = cols <= row_of
            row_of, cols, vals = row_of[keep], cols[keep], vals[keep]
        fh.write(f"{m.n_rows} {m.n_cols} {len(vals)}\n")
        for i, j, v in zip(row_of, cols, vals):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
