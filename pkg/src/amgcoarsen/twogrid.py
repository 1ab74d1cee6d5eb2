"""Two-level multigrid: interpolation from a C/F splitting, Gauss-Seidel
relaxation, the correction cycle, and convergence-factor measurement."""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse

from . import backend, sparse
from .errors import InputError


def build_interpolation(a, fine_mask, mode="diagonal", terms=3):
    """Interpolation operator for the given splitting (fine_mask[i] = 1 on F).

    In [F; C] block order P = [W; I], approximating the ideal reduction
    operator W* = -A_FF^{-1} A_FC:

    * "diagonal": W = -D_FF^{-1} A_FC, the one-term approximation. Keeps P
      exactly as sparse as A but loses the size-independent convergence
      factor on grids past a few thousand nodes.
    * "neumann": truncated Neumann series with `terms` extra Jacobi terms,
      W = -(I + N + ... + N^terms) D_FF^{-1} A_FC, N = I - D_FF^{-1} A_FF.
      The dominance constraint makes ||N|| <= (1-theta)/theta < 1, so a few
      terms recover near-ideal quality at sparse cost.
    * "ideal": dense A_FF solve; small problems only.

    Returned in the original node ordering; column j corresponds to the j-th
    coarse node in ascending node order.
    """
    fine_mask = np.asarray(fine_mask, dtype=np.uint8)
    n = a.n
    coarse = np.flatnonzero(fine_mask == 0)
    fine = np.flatnonzero(fine_mask == 1)

    diag = a.diagonal()
    if np.any((fine_mask == 1) & (diag == 0.0)):
        raise InputError("zero diagonal in a fine row")

    if mode == "diagonal":
        mode, terms = "neumann", 0
    if mode == "neumann":
        if terms < 0:
            raise InputError("terms must be >= 0")
        asc = a.to_scipy()
        aff = asc[fine][:, fine].tocsr()
        afc = asc[fine][:, coarse].tocsr()
        dinv = scipy.sparse.diags(1.0 / diag[fine])
        t = (dinv @ afc).tocsr()
        acc = t.copy()
        if terms > 0:
            nmat = (scipy.sparse.identity(fine.shape[0]) - dinv @ aff).tocsr()
            for _ in range(terms):
                t = (nmat @ t).tocsr()
                acc = acc + t
        w = (-acc).tocoo()
        rows, cols, vals = fine[w.row], w.col, w.data
    elif mode == "ideal":
        dense = a.to_dense()
        aff = dense[np.ix_(fine, fine)]
        afc = dense[np.ix_(fine, coarse)]
        w = -np.linalg.solve(aff, afc)
        rr, cc = np.nonzero(w)
        rows, cols, vals = fine[rr], cc, w[rr, cc]
    else:
        raise InputError(f"unknown interpolation mode {mode!r}")

    rows = np.concatenate([rows, coarse])
    cols = np.concatenate([cols, np.arange(coarse.shape[0])])
    vals = np.concatenate([vals, np.ones(coarse.shape[0])])
    return sparse.from_coo(n, coarse.shape[0], rows, cols, vals)


def gauss_seidel(a, x, b, sweeps):
    """Forward Gauss-Seidel in ascending node order; returns the updated
    iterate (the input is not modified)."""
    if np.any(a.diagonal() == 0.0):
        raise InputError("Gauss-Seidel needs a nonzero diagonal")
    x = np.array(x, dtype=np.float64, copy=True)
    b = np.asarray(b, dtype=np.float64)
    backend.gauss_seidel_sweeps(a.row_ptr, a.col_idx, a.values, x, b, int(sweeps))
    return x


@dataclass
class TwoGridHierarchy:
    a: sparse.SparseMatrix
    fine_mask: np.ndarray
    p: sparse.SparseMatrix
    p_t: sparse.SparseMatrix
    a_c: sparse.SparseMatrix
    n1: int = 1
    n2: int = 1
    _lu: Optional[tuple] = field(default=None, repr=False)

    @property
    def n(self):
        return self.a.n

    @property
    def n_coarse(self):
        return self.p.n_cols

    @property
    def grid_complexity(self):
        return (self.n + self.n_coarse) / self.n


def build_hierarchy(a, fine_mask, n1=1, n2=1, interpolation="neumann", terms=3):
    p = build_interpolation(a, fine_mask, mode=interpolation, terms=terms)
    a_c = sparse.galerkin_product(a, p)
    h = TwoGridHierarchy(
        a=a, fine_mask=np.asarray(fine_mask, dtype=np.uint8),
        p=p, p_t=p.transpose(), a_c=a_c, n1=n1, n2=n2,
    )
    if h.n_coarse > 0:
        dense = a_c.to_dense()
        lu, piv = scipy.linalg.lu_factor(dense)
        u_diag = np.abs(np.diag(lu))
        if not np.all(np.isfinite(lu)) or u_diag.min() == 0.0:
            raise InputError(
                "singular coarse operator "
                f"(cond ~ {np.linalg.cond(dense):.3e})"
            )
        h._lu = (lu, piv)
    return h


def two_grid_cycle(h, x, b):
    """One correction cycle: pre-relax, exact coarse solve, post-relax."""
    x = gauss_seidel(h.a, x, b, h.n1)
    if h.n_coarse > 0:
        r = b - sparse.matvec(h.a, x)
        rc = sparse.matvec(h.p_t, r)
        ec = scipy.linalg.lu_solve(h._lu, rc)
        x = x + sparse.matvec(h.p, ec)
    return gauss_seidel(h.a, x, b, h.n2)


def a_norm(a, x):
    return float(np.sqrt(abs(np.dot(x, sparse.matvec(a, x)))))


_NORM_FLOOR = 1e-150


def measure_convergence_factor(h, trials=5, cycles=20, seed=0):
    """Per-cycle error contraction on the homogeneous problem.

    Runs `cycles` cycles on b = 0 from random starts and returns the largest
    (over trials) geometric mean of the A-norm reduction over the last
    cycles/2 iterations. If the error underflows before the averaging window
    fills, the window shrinks with a warning.
    """
    b = np.zeros(h.n)
    rho = 0.0
    window = max(1, cycles // 2)
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        x = rng.standard_normal(h.n)
        enorm = a_norm(h.a, x)
        if enorm == 0.0:
            continue
        ratios = []
        for _ in range(cycles):
            x = two_grid_cycle(h, x, b)
            new = a_norm(h.a, x)
            ratios.append(new / enorm)
            enorm = new
            if enorm < _NORM_FLOOR:
                break
        if len(ratios) < window:
            warnings.warn(
                f"error underflow after {len(ratios)} cycles; "
                f"averaging over {len(ratios)} instead of {window}"
            )
            tail = ratios
        else:
            tail = ratios[-window:]
        if any(r == 0.0 for r in tail):
            trial_rho = 0.0
        else:
            trial_rho = float(np.exp(np.mean(np.log(tail))))
        rho = max(rho, trial_rho)
    return rho


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residuals: list
    converged: bool


def solve(h, b, x0=None, delta=1e-8, max_iters=200):
    """Iterate cycles until the residual 2-norm drops below delta."""
    if delta <= 0:
        raise InputError("delta must be positive")
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros(h.n) if x0 is None else np.array(x0, dtype=np.float64)
    residuals = [float(np.linalg.norm(b - sparse.matvec(h.a, x)))]
    if residuals[-1] < delta:
        return SolveResult(x=x, iterations=0, residuals=residuals, converged=True)
    for k in range(1, max_iters + 1):
        x = two_grid_cycle(h, x, b)
        residuals.append(float(np.linalg.norm(b - sparse.matvec(h.a, x))))
        if residuals[-1] < delta:
            return SolveResult(x=x, iterations=k, residuals=residuals,
                               converged=True)
    return SolveResult(x=x, iterations=max_iters, residuals=residuals,
                       converged=False)
