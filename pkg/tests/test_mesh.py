import json

import numpy as np
import pytest

from amgcoarsen import mesh
from amgcoarsen.errors import FileFormatError, InputError


def test_three_points_single_triangle():
    m = mesh.random_convex_mesh(3, (3, 10), seed=5)
    assert m.n_vertices == 3
    assert m.n_triangles == 1
    assert m.boundary.sum() == 3


def test_deterministic_in_seed():
    a = mesh.random_convex_mesh(8, (30, 120), seed=42)
    b = mesh.random_convex_mesh(8, (30, 120), seed=42)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.boundary, b.boundary)


def test_target_range_hit_over_seeds():
    for seed in range(100):
        m = mesh.random_convex_mesh(6, (30, 120), seed=seed)
        assert 30 <= m.n_vertices <= 120


def test_positive_orientation_and_conformity():
    m = mesh.random_convex_mesh(10, (60, 120), seed=7)
    assert np.all(mesh.signed_areas(m.vertices, m.triangles) > 0)
    _, counts = mesh._edge_counts(m.triangles)
    assert counts.max() <= 2


def test_interior_vertices_exist_after_refinement():
    m = mesh.random_convex_mesh(6, (30, 120), seed=3)
    assert np.any(m.boundary == 0)


def test_too_many_seed_points_rejected():
    with pytest.raises(InputError):
        mesh.random_convex_mesh(50, (10, 20), seed=0)


def test_stretched_identity():
    m = mesh.random_convex_mesh(6, (30, 60), seed=1)
    s = mesh.stretched_mesh(m, 1.0)
    assert np.array_equal(s.vertices, m.vertices)
    assert np.array_equal(s.triangles, m.triangles)


def test_stretched_doubles_extent():
    m = mesh.random_convex_mesh(6, (30, 60), seed=1)
    s = mesh.stretched_mesh(m, 2.0)
    def extent(mm):
        return mm.vertices[:, 0].max() - mm.vertices[:, 0].min()
    assert np.isclose(extent(s), 2.0 * extent(m))
    assert s.n_triangles == m.n_triangles


def test_json_round_trip(tmp_path):
    m = mesh.random_convex_mesh(7, (30, 60), seed=9)
    path = tmp_path / "m.json"
    mesh.write_mesh(path, m)
    back = mesh.load_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.boundary, m.boundary)


def test_malformed_json_names_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"vertices": [[0, 0], [1, 0], [0, 1]],\n  "triangles": [[0, 1, 2]\n}\n')
    with pytest.raises(FileFormatError) as err:
        mesh.load_mesh(path)
    assert ":3" in str(err.value) or ":2" in str(err.value)


def test_interior_boundary_flag_rejected(tmp_path):
    m = mesh.random_convex_mesh(6, (30, 60), seed=2)
    doc = {
        "vertices": m.vertices.tolist(),
        "triangles": m.triangles.tolist(),
        "boundary": [1] * m.n_vertices,  # flags interior vertices too
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(FileFormatError):
        mesh.load_mesh(path)
