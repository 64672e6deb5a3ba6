import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermistor_cn.linalg import (
    ConvergenceError,
    CsrMatrix,
    InvalidMatrixError,
    SolverConfig,
    solve_spd,
    spmv,
)


def _spd(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.4)
    return a @ a.T + n * np.eye(n)


@given(st.integers(1, 30), st.integers(0, 10**6))
def test_spmv_matches_dense(n, seed):
    a = _spd(n, seed)
    x = np.random.default_rng(seed + 1).standard_normal(n)
    np.testing.assert_allclose(spmv(CsrMatrix.from_dense(a), x), a @ x, rtol=1e-13, atol=1e-12)


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError):
        spmv(CsrMatrix.from_dense(np.eye(3)), np.ones(4))


@given(st.integers(1, 40), st.integers(0, 10**6))
def test_cg_matches_dense_solve(n, seed):
    a = _spd(n, seed)
    b = np.random.default_rng(seed + 2).standard_normal(n)
    x, rep = solve_spd(CsrMatrix.from_dense(a), b)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(a, b), rtol=0, atol=1e-9 * max(1.0, np.abs(x).max()))


def test_identity_one_iteration():
    x, rep = solve_spd(CsrMatrix.from_dense(np.eye(5)), np.arange(5.0))
    np.testing.assert_allclose(x, np.arange(5.0))
    assert rep.iterations == 1


def test_zero_rhs():
    x, rep = solve_spd(CsrMatrix.from_dense(_spd(6, 0)), np.zeros(6))
    assert np.all(x == 0)
    assert rep.iterations == 0


def test_non_positive_diagonal():
    a = np.diag([1.0, 0.0, 2.0])
    with pytest.raises(InvalidMatrixError):
        solve_spd(CsrMatrix.from_dense(a), np.ones(3))


def test_indefinite_detected():
    a = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(InvalidMatrixError):
        solve_spd(CsrMatrix.from_dense(a), np.array([1.0, -1.0]))


def test_budget_exhausted():
    a = _spd(30, 3)
    with pytest.raises(ConvergenceError) as info:
        solve_spd(CsrMatrix.from_dense(a), np.ones(30), SolverConfig(max_iter=2))
    assert info.value.report.iterations == 2
    assert not info.value.report.converged


@pytest.mark.parametrize("rtol", [1e-2, 1e-6, 1e-10])
def test_stopping_rule(rtol):
    a = _spd(40, 5)
    b = np.random.default_rng(4).standard_normal(40)
    x, rep = solve_spd(CsrMatrix.from_dense(a), b, SolverConfig(rtol=rtol))
    assert np.linalg.norm(b - a @ x) <= 1.0001 * rtol * np.linalg.norm(b)
    assert rep.relative_residual <= rtol
    assert len(rep.history) == rep.iterations + 1


def test_csr_algebra():
    a, b = _spd(4, 1), _spd(4, 2)
    A = CsrMatrix.from_dense(a + 1e-3)
    B = A.with_data(CsrMatrix.from_dense(b + 1e-3).data)
    np.testing.assert_allclose((A + 2.0 * B).toarray(), (a + 1e-3) + 2 * (b + 1e-3))
    np.testing.assert_allclose((A - B).toarray(), a - b)
    np.testing.assert_allclose(A.diagonal(), np.diag(a + 1e-3))


def test_write_coo(tmp_path):
    A = CsrMatrix.from_dense(np.array([[2.0, 1.0], [1.0, 3.0]]))
    p = tmp_path / "a.coo"
    A.write_coo(p)
    assert p.read_text().strip()
