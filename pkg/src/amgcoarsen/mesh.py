"""Triangular meshes: random convex generation, refinement, JSON I/O.

Random meshes triangulate the convex hull of uniform points and are refined
by repeated longest-edge bisection (midpoint insertion, one vertex per step)
until the vertex count lands in the requested window. Everything is a pure
function of its seed.
"""

import heapq
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import FileFormatError, InputError

_RESAMPLE_CAP = 10


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray   # (nv, 2) float64
    triangles: np.ndarray  # (nt, 3) int64, positively oriented
    boundary: np.ndarray   # (nv,) uint8, 1 = Dirichlet vertex

    @property
    def n_vertices(self):
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self):
        return int(self.triangles.shape[0])


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _edge_counts(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]],
                        triangles[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq, counts


def topological_boundary(n_vertices, triangles):
    """Vertices incident to an edge shared by exactly one triangle."""
    uniq, counts = _edge_counts(triangles)
    flags = np.zeros(n_vertices, dtype=np.uint8)
    flags[uniq[counts == 1].ravel()] = 1
    return flags


def make_mesh(vertices, triangles, boundary=None):
    """Normalize raw arrays into a TriMesh: orient positively, validate edge
    sharing, and derive boundary flags when not given."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise InputError("triangle vertex index out of range")
    areas = signed_areas(vertices, triangles)
    if np.any(areas == 0.0):
        raise InputError("mesh contains a degenerate (zero-area) triangle")
    flip = areas < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    uniq, counts = _edge_counts(triangles)
    if np.any(counts > 2):
        raise InputError("mesh edge shared by more than two triangles")
    topo = topological_boundary(len(vertices), triangles)
    if boundary is None:
        boundary = topo
    else:
        boundary = np.asarray(boundary, dtype=np.uint8).reshape(-1)
        if boundary.shape[0] != vertices.shape[0]:
            raise InputError("boundary flag count does not match vertex count")
        if np.any((boundary == 1) & (topo == 0)):
            raise InputError("boundary flag set on an interior vertex")
    return TriMesh(vertices=vertices, triangles=triangles, boundary=boundary)


def _refine_to_target(vertices, triangles, lo):
    """Longest-edge bisection until the vertex count reaches lo. Adds exactly
    one vertex per step, splitting every triangle containing the edge."""
    verts = [tuple(v) for v in vertices]
    tris = {}
    next_tid = 0
    edge_tris = {}

    def edge_key(u, v):
        return (u, v) if u < v else (v, u)

    def register(t):
        nonlocal next_tid
        tris[next_tid] = t
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            edge_tris.setdefault(edge_key(a, b), set()).add(next_tid)
        next_tid += 1

    def unregister(tid):
        t = tris.pop(tid)
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            k = edge_key(a, b)
            edge_tris[k].discard(tid)
            if not edge_tris[k]:
                del edge_tris[k]

    def length2(k):
        du = verts[k[0]][0] - verts[k[1]][0]
        dv = verts[k[0]][1] - verts[k[1]][1]
        return du * du + dv * dv

    for t in triangles:
        register(tuple(int(x) for x in t))
    heap = [(-length2(k), k) for k in edge_tris]
    heapq.heapify(heap)

    while len(verts) < lo:
        while True:
            neg, k = heapq.heappop(heap)
            if k in edge_tris and -length2(k) == neg:
                break
        u, v = k
        w = len(verts)
        verts.append(((verts[u][0] + verts[v][0]) / 2.0,
                      (verts[u][1] + verts[v][1]) / 2.0))
        opposite = []
        for tid in list(edge_tris[k]):
            t = tris[tid]
            # rotate so the split edge is (t[0], t[1]); both children keep
            # the parent's orientation
            while {t[0], t[1]} != {u, v}:
                t = (t[1], t[2], t[0])
            unregister(tid)
            register((t[0], w, t[2]))
            register((w, t[1], t[2]))
            opposite.append(t[2])
        for a in (u, v, *opposite):
            kk = edge_key(a, w)
            heapq.heappush(heap, (-length2(kk), kk))

    return (np.array(verts, dtype=np.float64),
            np.array(sorted(tris.values()), dtype=np.int64))


def random_convex_mesh(n_points, target_nodes, seed):
    """Triangulated convex hull of n_points uniform points in the unit square,
    refined so the vertex count falls in target_nodes = (lo, hi).

    Deterministic in seed. Collinear point sets are resampled up to a cap.
    """
    if n_points < 3:
        raise InputError("need at least 3 points")
    lo, hi = target_nodes
    if lo > hi or lo < 1:
        raise InputError(f"bad target range {target_nodes}")
    if n_points > hi:
        raise InputError(f"{n_points} seed points already exceed target max {hi}")
    rng = np.random.default_rng(seed)
    last_err = None
    for _ in range(_RESAMPLE_CAP):
        pts = rng.random((n_points, 2))
        try:
            dela = Delaunay(pts)
        except QhullError as e:
            last_err = e
            continue
        tri = np.asarray(dela.simplices, dtype=np.int64)
        if np.any(signed_areas(pts, tri) == 0.0):
            last_err = InputError("degenerate triangle in Delaunay output")
            continue
        verts, tris = _refine_to_target(pts, _orient(pts, tri), lo)
        return make_mesh(verts, tris)
    raise InputError(f"could not build a non-degenerate mesh: {last_err}")


def _orient(vertices, triangles):
    areas = signed_areas(vertices, triangles)
    out = triangles.copy()
    out[areas < 0] = out[areas < 0][:, [0, 2, 1]]
    return out


def stretched_mesh(mesh, aspect):
    """Scale x-coordinates by aspect; connectivity unchanged."""
    if aspect < 1:
        raise InputError("aspect must be >= 1")
    v = mesh.vertices.copy()
    v[:, 0] *= aspect
    return TriMesh(vertices=v, triangles=mesh.triangles, boundary=mesh.boundary)


def write_mesh(path, mesh):
    doc = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "triangles": [[int(a), int(b), int(c)] for a, b, c in mesh.triangles],
        "boundary": [int(b) for b in mesh.boundary],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_mesh(path):
    """Read the mesh JSON format; errors carry the offending line."""
    with open(path, "r") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"malformed JSON: {e.msg}", path, e.lineno)
    for key in ("vertices", "triangles", "boundary"):
        if key not in doc:
            raise FileFormatError(f"missing key {key!r}", path)
    try:
        return make_mesh(doc["vertices"], doc["triangles"], doc["boundary"])
    except (InputError, ValueError) as e:
        raise FileFormatError(str(e), path)
