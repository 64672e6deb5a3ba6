import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermistor_cn.fem import (
    DegenerateCoefficientError,
    DofMap,
    Integrand,
    ReferenceElement,
    apply_dirichlet,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    evaluate_fe_field,
    integrate,
    interpolate,
)
from thermistor_cn.linalg import solve_spd
from thermistor_cn.mesh import build_mesh
from thermistor_cn.mms import error_norms, estimate_order

SPACES = [(2, 1), (2, 2), (3, 1), (3, 2)]


def dm(dim, degree, M):
    return DofMap(build_mesh(dim, M), degree)


def test_p1_single_square_stiffness():
    # two right triangles sharing the diagonal 0-3; the cotangent formula
    # gives zero coupling across the diagonal
    K = assemble_stiffness(dm(2, 1, 1)).toarray()
    expected = np.array([[1, -0.5, -0.5, 0], [-0.5, 1, 0, -0.5], [-0.5, 0, 1, -0.5], [0, -0.5, -0.5, 1]])
    np.testing.assert_allclose(K, expected, atol=1e-15)
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-15)


def test_p1_triangle_mass_oracle():
    # element mass of a triangle is |T|/12 * [[2,1,1],[1,2,1],[1,1,2]]
    M = assemble_mass(dm(2, 1, 1)).toarray()
    local = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    expected = np.zeros((4, 4))
    for s in build_mesh(2, 1).simplices:
        expected[np.ix_(s, s)] += local
    np.testing.assert_allclose(M, expected, atol=1e-15)


@pytest.mark.parametrize("dim,degree", SPACES)
def test_symmetric_and_positive(dim, degree):
    d = dm(dim, degree, 3)
    coeff = lambda x: 1.0 + x[..., 0] ** 2
    for A in (assemble_stiffness(d, coeff), assemble_mass(d, coeff)):
        a = A.toarray()
        np.testing.assert_allclose(a, a.T, atol=1e-14)
    K = assemble_stiffness(d, coeff).toarray()
    free = d.free
    assert np.linalg.eigvalsh(K[np.ix_(free, free)]).min() > 0
    assert np.linalg.eigvalsh(assemble_mass(d).toarray()).min() > 0


@pytest.mark.parametrize("dim,degree", SPACES)
def test_partition_of_unity(dim, degree):
    d = dm(dim, degree, 2)
    el = d.element
    bary = np.random.default_rng(0).dirichlet(np.ones(dim + 1), size=50)
    np.testing.assert_allclose(el.values(bary).sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(el.reference_gradients(bary).sum(axis=1), 0.0, atol=1e-13)
    # constants are in the kernel of the stiffness and the mass integrates to 1
    np.testing.assert_allclose(assemble_stiffness(d).toarray().sum(axis=1), 0.0, atol=1e-13)
    assert assemble_mass(d).toarray().sum() == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("dim,degree", SPACES)
def test_nodal_basis_property(dim, degree):
    el = ReferenceElement(dim, degree)
    np.testing.assert_allclose(el.values(el.dof_barycentric), np.eye(el.n_basis), atol=1e-15)


@given(
    space=st.sampled_from(SPACES),
    coef=st.lists(st.floats(-3, 3), min_size=10, max_size=10),
    seed=st.integers(0, 10**6),
)
def test_interpolation_exact_on_polynomials(space, coef, seed):
    dim, degree = space
    d = dm(dim, degree, 3)
    c = np.array(coef)

    def g(x):
        lin = c[0] + x @ c[1 : dim + 1]
        if degree == 1:
            return lin
        quad = c[4] * x[..., 0] ** 2 + c[5] * x[..., 0] * x[..., 1] + c[6] * x[..., -1] ** 2
        return lin + quad

    U = interpolate(d, g)
    pts = np.random.default_rng(seed).random((30, dim))
    vals, _ = evaluate_fe_field(d, U, pts)
    np.testing.assert_allclose(vals, g(pts), atol=1e-11)


@pytest.mark.parametrize("dim,degree", SPACES)
def test_point_gradients_match_basis_oracle(dim, degree):
    d = dm(dim, degree, 2)
    U = np.random.default_rng(1).standard_normal(d.n_dofs)
    pts = np.random.default_rng(2).random((15, dim)) * 0.98 + 0.01
    vals, grads = evaluate_fe_field(d, U, pts)
    # central differences of the piecewise polynomial inside a simplex
    eps = 1e-6
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = eps
        cells = d.mesh.locate(pts)
        same = (d.mesh.locate(pts + e) == cells) & (d.mesh.locate(pts - e) == cells)
        fd = (evaluate_fe_field(d, U, pts + e)[0] - evaluate_fe_field(d, U, pts - e)[0]) / (2 * eps)
        np.testing.assert_allclose(fd[same], grads[same, k], rtol=1e-6, atol=1e-6)


def test_load_and_integrate():
    d = dm(2, 2, 4)
    f = lambda x: np.sin(x[..., 0]) * x[..., 1]
    exact = (1 - np.cos(1.0)) / 2
    assert integrate(d, f) == pytest.approx(exact, rel=1e-9)
    assert assemble_load(d, f).sum() == pytest.approx(exact, rel=1e-9)
    cells_seen = []
    integrand = Integrand(lambda x, cells: (cells_seen.append(len(cells)), np.ones(x.shape[:-1]))[1])
    assert integrate(d, integrand) == pytest.approx(1.0)
    assert sum(cells_seen) == d.n_cells


def test_nonpositive_coefficient_rejected():
    with pytest.raises(DegenerateCoefficientError):
        assemble_stiffness(dm(2, 1, 2), lambda x: x[..., 0] - 0.5)


def _poisson(dim, degree, M):
    """-Lap u = f with u = sin(pi x) sin(pi y) (z) and zero boundary data."""
    d = dm(dim, degree, M)
    pi = np.pi
    u = lambda x: np.prod(np.sin(pi * x), axis=-1)
    grad = lambda x: np.stack(
        [pi * np.cos(pi * x[..., k]) * np.prod(np.sin(pi * np.delete(x, k, axis=-1)), axis=-1) for k in range(dim)],
        axis=-1,
    )
    f = lambda x: dim * pi**2 * u(x)
    sys = apply_dirichlet(assemble_stiffness(d), assemble_load(d, f), d, np.zeros(d.n_dofs))
    x, _ = solve_spd(sys.matrix, sys.rhs)
    return error_norms(d, sys.expand(x), u, grad)


@pytest.mark.parametrize("degree,order", [(1, 2.0), (2, 3.0)])
def test_poisson_convergence(degree, order):
    e1, e2 = _poisson(2, degree, 8), _poisson(2, degree, 16)
    assert estimate_order(e1.l2, e2.l2) == pytest.approx(order, abs=0.15)
    assert estimate_order(e1.h1_semi, e2.h1_semi) == pytest.approx(order - 1, abs=0.15)


def test_nonhomogeneous_dirichlet_harmonic():
    # exp(x) sin(y) is harmonic; P1 with exact boundary lifting converges at order 2
    g = lambda x: np.exp(x[..., 0]) * np.sin(x[..., 1])
    errs = []
    for M in (8, 16):
        d = dm(2, 1, M)
        sys = apply_dirichlet(assemble_stiffness(d), np.zeros(d.n_dofs), d, interpolate(d, g))
        x, _ = solve_spd(sys.matrix, sys.rhs)
        U = sys.expand(x)
        np.testing.assert_array_equal(U[d.dirichlet_mask], interpolate(d, g)[d.dirichlet_mask])
        errs.append(error_norms(d, U, g).l2)
    assert estimate_order(*errs) == pytest.approx(2.0, abs=0.15)


def test_affine_solution_reproduced():
    # an affine Dirichlet datum is reproduced exactly by P1
    g = lambda x: 1.0 + 2.0 * x[..., 0] - x[..., 1]
    d = dm(2, 1, 5)
    sys = apply_dirichlet(assemble_stiffness(d), np.zeros(d.n_dofs), d, interpolate(d, g))
    x, _ = solve_spd(sys.matrix, sys.rhs)
    np.testing.assert_allclose(sys.expand(x), g(d.coords), atol=1e-9)


def test_dofmap_counts():
    assert dm(2, 2, 3).n_dofs == 7**2
    assert dm(3, 2, 2).n_dofs == 5**3
    d = dm(2, 2, 3)
    assert d.dirichlet_mask.sum() == 4 * 6
