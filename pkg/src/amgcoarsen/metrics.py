"""Splitting quality metrics and the structured-grid upper bound."""

import warnings

import numpy as np


def f_fraction(state):
    """|F| / n for a coarsening state."""
    return float(state.f.sum() / state.n)


def effective_convergence_factor(rho, grid_complexity):
    """Convergence per unit work: rho^(1 / grid_complexity).

    rho >= 1 is flagged as divergent and returned unchanged with a warning.
    """
    if grid_complexity < 1:
        raise ValueError("grid complexity is at least 1")
    if rho < 0:
        raise ValueError("negative convergence factor")
    if rho >= 1:
        warnings.warn(f"divergent cycle (rho = {rho}); returning rho unchanged")
        return float(rho)
    return float(rho ** (1.0 / grid_complexity))


def structured_upper_bound(nx, ny, clamp=False):
    """Largest achievable F-fraction on an nx-by-ny 5-point grid:
    0.8 + 2/nx + 2/ny - 4/(nx*ny). clamp=True limits the value to [0, 1]
    for reporting; inequality tests use the raw value."""
    raw = 0.8 + 2.0 / nx + 2.0 / ny - 4.0 / (nx * ny)
    if clamp:
        return float(min(1.0, max(0.0, raw)))
    return float(raw)


def verify_pentomino_bound(fine_mask, nx, ny):
    """Check that every interior plus-shaped 5-cell set of the grid contains
    at least one coarse node. Vacuously true when the grid has no interior.

    fine_mask: per-node flags, 1 = fine, row-major (iy * nx + ix) order.
    """
    fine_mask = np.asarray(fine_mask).reshape(ny, nx)
    if nx < 3 or ny < 3:
        return True
    c = fine_mask == 0
    covered = (c[1:-1, 1:-1] | c[:-2, 1:-1] | c[2:, 1:-1]
               | c[1:-1, :-2] | c[1:-1, 2:])
    return bool(covered.all())
