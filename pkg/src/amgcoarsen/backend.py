"""Kernel backend selection.

The compiled extension (amgcoarsen._kernels) is preferred when importable;
otherwise the numpy fallback (_kernels_py) is used. AMGCOARSEN_BACKEND=python
or =cython forces the choice; forcing cython without a built extension is an
error rather than a silent downgrade.

matvec calls are instrumented here (call count plus accumulated stored-entry
operations) so both backends report identical counts.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None

_FORCED = os.environ.get("AMGCOARSEN_BACKEND", "").strip().lower()
if _FORCED and _FORCED not in ("python", "cython"):
    raise ImportError(f"AMGCOARSEN_BACKEND must be 'python' or 'cython', got {_FORCED!r}")
if _FORCED == "cython" and _kernels_cy is None:
    raise ImportError("AMGCOARSEN_BACKEND=cython but the compiled extension is not available")

_active_name = "python" if (_FORCED == "python" or _kernels_cy is None) else "cython"
_active = _kernels_py if _active_name == "python" else _kernels_cy

matvec_calls = 0
matvec_ops = 0


def backend_name():
    return _active_name


def available_backends():
    names = ["python"]
    if _kernels_cy is not None:
        names.append("cython")
    return names


def set_backend(name):
    """Switch the active kernel set ('python' or 'cython'). Used by tests and
    the kernel benchmark; normal code never calls this."""
    global _active, _active_name
    if name == "python":
        _active = _kernels_py
    elif name == "cython":
        if _kernels_cy is None:
            raise ValueError("compiled extension not available")
        _active = _kernels_cy
    else:
        raise ValueError(f"unknown backend {name!r}")
    _active_name = name


def reset_matvec_counters():
    global matvec_calls, matvec_ops
    matvec_calls = 0
    matvec_ops = 0


def matvec_counters():
    return matvec_calls, matvec_ops


def csr_matvec(rp, col, val, x, out):
    global matvec_calls, matvec_ops
    matvec_calls += 1
    matvec_ops += col.shape[0]
    _active.csr_matvec(rp, col, val, x, out)


def gauss_seidel_sweeps(rp, col, val, x, b, sweeps):
    _active.gauss_seidel_sweeps(rp, col, val, x, b, sweeps)


def masked_row_abs_sums(rp, col, absval, mask, out):
    _active.masked_row_abs_sums(rp, col, absval, mask, out)


def recompute_masked_sums(rp, col, absval, mask, rows, out):
    _active.recompute_masked_sums(rp, col, absval, mask, rows, out)


def coarsen_node(rp, col, absval, absdiag, theta, f, v, fsum, node):
    return _active.coarsen_node(rp, col, absval, absdiag, theta, f, v, fsum, node)


def evaluate_sweep(rp, col, absval, absdiag, theta, f, v, fsum, adv, sub_ptr, sub_nodes):
    return _active.evaluate_sweep(rp, col, absval, absdiag, theta, f, v, fsum,
                                  adv, sub_ptr, sub_nodes)


def bfs_assign(rp, col, centers, dist, owner):
    return _active.bfs_assign(rp, col, centers, dist, owner)


def subdomain_centers(rp, col, sub_ptr, sub_nodes, assignment, out_centers):
    _active.subdomain_centers(rp, col, sub_ptr, sub_nodes, assignment, out_centers)
