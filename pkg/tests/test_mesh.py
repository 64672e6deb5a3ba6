import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermistor_cn.mesh import MeshError, build_mesh, build_mesh_2d, build_mesh_3d, mesh_size


def test_single_square():
    m = build_mesh_2d(1)
    assert m.n_nodes == 4
    assert m.n_simplices == 2
    np.testing.assert_allclose(m.volumes(), [0.5, 0.5])


def test_single_cube_is_six_kuhn_tets():
    m = build_mesh_3d(1)
    assert m.n_simplices == 6
    np.testing.assert_allclose(m.volumes(), 1.0 / 6.0)
    # all six share the main diagonal 0 -> 7
    for s in m.simplices:
        assert {0, 7} <= set(s.tolist())


def test_2d_diagonal_runs_lower_left_to_upper_right():
    m = build_mesh_2d(1)
    for s in m.simplices:
        assert {0, 3} <= set(s.tolist())


@pytest.mark.parametrize("dim,M", [(2, 1), (2, 5), (2, 12), (3, 1), (3, 4)])
def test_counts_orientation_and_volume(dim, M):
    m = build_mesh(dim, M)
    assert m.n_nodes == (M + 1) ** dim
    assert m.n_simplices == math.factorial(dim) * M**dim
    vol = m.volumes()
    assert np.all(vol > 0)
    assert vol.sum() == pytest.approx(1.0, abs=1e-13)
    assert mesh_size(m) == pytest.approx(math.sqrt(dim) / M)


@pytest.mark.parametrize("dim,M", [(2, 6), (3, 3)])
def test_conforming_facets(dim, M):
    m = build_mesh(dim, M)
    faces, counts = m.facets()
    assert set(np.unique(counts)) <= {1, 2}
    # facets seen once are exactly the boundary ones
    on_bnd = np.all(m.boundary_nodes[faces[counts == 1]], axis=1)
    assert on_bnd.all()
    n_bnd_faces = 2 * dim * M ** (dim - 1) * math.factorial(dim - 1)
    assert (counts == 1).sum() == n_bnd_faces


def test_boundary_nodes():
    m = build_mesh_2d(4)
    assert m.boundary_nodes.sum() == 16
    x = m.nodes[m.boundary_nodes]
    assert np.all(np.any((x == 0) | (x == 1), axis=1))


def test_node_numbering_x_fastest():
    m = build_mesh_2d(3)
    np.testing.assert_array_equal(m.nodes[1], [1 / 3, 0])
    assert m.node_index([2, 1]) == 6


def test_arrays_are_read_only():
    m = build_mesh_2d(2)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 5.0


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_bad_sizes(bad):
    with pytest.raises(MeshError):
        build_mesh(2, bad)


def test_bad_dimension():
    with pytest.raises(MeshError):
        build_mesh(4, 2)


@given(
    dim=st.sampled_from([2, 3]),
    M=st.integers(1, 6),
    seed=st.integers(0, 2**31 - 1),
)
def test_locate_returns_containing_simplex(dim, M, seed):
    m = build_mesh(dim, M)
    pts = np.random.default_rng(seed).random((20, dim))
    cells = m.locate(pts)
    x0 = m.nodes[m.simplices[cells, 0]]
    lam = np.linalg.solve(m.jacobians()[cells], (pts - x0)[..., None])[..., 0]
    bary = np.hstack([1 - lam.sum(axis=1, keepdims=True), lam])
    assert np.all(bary > -1e-12)


def test_locate_rejects_outside():
    with pytest.raises(MeshError):
        build_mesh_2d(2).locate([[1.2, 0.5]])


def test_write_text(tmp_path):
    m = build_mesh_2d(2)
    p = tmp_path / "mesh.txt"
    m.write_text(p)
    assert len(p.read_text().splitlines()) == m.n_nodes + m.n_simplices
