"""Problem instances: discrete Poisson operators from structured grids and
triangular meshes, plus file ingestion for external grid families."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import mesh as meshmod
from . import mmio, sparse
from .errors import InputError


@dataclass
class ProblemInstance:
    matrix: sparse.SparseMatrix
    mesh: Optional[meshmod.TriMesh] = None
    family_tag: str = ""
    params: dict = field(default_factory=dict)


def fd_poisson_structured(nx, ny):
    """5-point finite-difference Poisson operator on an nx-by-ny grid with
    eliminated Dirichlet boundary: diagonal 4, -1 to each grid neighbor.

    Row-major node order, node (ix, iy) -> iy * nx + ix.
    """
    if nx < 1 or ny < 1:
        raise InputError("grid dimensions must be positive")
    tx = sp.diags([-np.ones(nx - 1), 2 * np.ones(nx), -np.ones(nx - 1)],
                  [-1, 0, 1], format="csr")
    ty = sp.diags([-np.ones(ny - 1), 2 * np.ones(ny), -np.ones(ny - 1)],
                  [-1, 0, 1], format="csr")
    a = sp.kron(sp.identity(ny), tx) + sp.kron(ty, sp.identity(nx))
    m = sparse.from_scipy(a.tocsr())
    return ProblemInstance(matrix=m, family_tag="structured",
                           params={"nx": nx, "ny": ny})


def assemble_p1_stiffness(mesh):
    """Piecewise-linear stiffness matrix on all mesh vertices (no boundary
    treatment). Entry (i,j) for an edge carries the cotangent weights of the
    angles opposite to the edge."""
    tri = mesh.triangles
    p = mesh.vertices
    x = p[:, 0][tri]
    y = p[:, 1][tri]
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    area4 = 4.0 * meshmod.signed_areas(p, tri)
    k = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / area4[:, None, None]
    rows = np.broadcast_to(tri[:, :, None], k.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], k.shape).ravel()
    return sparse.from_coo(mesh.n_vertices, mesh.n_vertices,
                           rows, cols, k.ravel(), ensure_diagonal=True)


def fem_p1_laplacian(mesh):
    """Stiffness matrix with Dirichlet vertices eliminated; the surviving
    unknowns are the vertices with boundary flag 0."""
    full = assemble_p1_stiffness(mesh)
    keep = np.flatnonzero(mesh.boundary == 0)
    if keep.size == 0:
        raise InputError("mesh has no interior vertices: nothing to solve")
    if keep.size == mesh.n_vertices:
        raise InputError("mesh flags no Dirichlet vertices: operator would "
                         "be singular")
    a = full.to_scipy()[keep][:, keep]
    m = sparse.from_scipy(a.tocsr())
    return ProblemInstance(
        matrix=m, mesh=mesh, family_tag="fem",
        params={"interior_vertices": keep.tolist()},
    )


def load_matrix(path):
    """Matrix Market file -> ProblemInstance (structure validated)."""
    m = mmio.read_matrix_market(path)
    sparse.validate_operator(m)
    if np.any(m.diagonal() <= 0):
        raise InputError(f"{path}: non-positive diagonal entry")
    return ProblemInstance(matrix=m, family_tag="ingest", params={"path": str(path)})


def load_mesh_problem(path):
    """Mesh JSON file -> FEM ProblemInstance."""
    return fem_p1_laplacian(meshmod.load_mesh(path))
