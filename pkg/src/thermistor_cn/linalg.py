"""CSR storage and a Jacobi-preconditioned conjugate gradient solver."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class InvalidMatrixError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Raised when CG exhausts its iteration budget."""

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(
            message
            or f"CG did not converge: {report.iterations} iterations, "
            f"relative residual {report.relative_residual:.3e}"
        )


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n: int

    def __post_init__(self):
        if len(self.indptr) != self.n + 1:
            raise InvalidMatrixError("indptr length must be n + 1")
        if len(self.indices) != len(self.data) or self.indptr[-1] != len(self.data):
            raise InvalidMatrixError("inconsistent CSR arrays")

    @functools.cached_property
    def _scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @property
    def nnz(self):
        return len(self.data)

    @property
    def shape(self):
        return (self.n, self.n)

    def with_data(self, data):
        """Same sparsity pattern, new values."""
        return CsrMatrix(self.indptr, self.indices, np.asarray(data, dtype=float), self.n)

    def row_ids(self):
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def diagonal(self):
        rows = self.row_ids()
        diag = np.zeros(self.n)
        on = rows == self.indices
        diag[rows[on]] = self.data[on]
        return diag

    def toarray(self):
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.row_ids(), self.indices), self.data)
        return out

    def __matmul__(self, x):
        return spmv(self, x)

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__

    def __add__(self, other):
        if other.indptr is not self.indptr and not (
            np.array_equal(other.indptr, self.indptr) and np.array_equal(other.indices, self.indices)
        ):
            raise InvalidMatrixError("matrices must share a sparsity pattern")
        return self.with_data(self.data + other.data)

    def __sub__(self, other):
        return self + (-1.0) * other

    def write_coo(self, path):
        """Debug dump as 'i j value' lines."""
        with open(path, "w") as fh:
            for i, j, v in zip(self.row_ids(), self.indices, self.data):
                fh.write(f"{i} {j} {v:.17g}\n")

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=float)
        m = sp.csr_matrix(a)
        m.sort_indices()
        return cls(m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.copy(), a.shape[0])


def spmv(A, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {x.shape}")
    return A._scipy @ x


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-10
    atol: float = 1e-14
    max_iter: int | None = None  # default 10 n

    def __post_init__(self):
        if self.rtol <= 0 or self.atol < 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    # sqrt(r . D^-1 r) after each iteration, starting with the initial residual
    history: list = field(default_factory=list, repr=False)


def solve_spd(A, b, config=None):
    """Jacobi-preconditioned CG from a zero initial guess.

    Returns ``(x, report)``. Raises ConvergenceError if the iteration budget
    is exhausted before ``||b - Ax|| <= max(rtol ||b||, atol)``.
    """
    config = config or SolverConfig()
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({A.n},)")
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise InvalidMatrixError("matrix has a non-positive diagonal entry")
    max_iter = config.max_iter if config.max_iter is not None else 10 * max(A.n, 1)

    x = np.zeros(A.n)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, SolveReport(0, 0.0, True, [0.0])

    inv_diag = 1.0 / diag
    stop = max(config.rtol * bnorm, config.atol)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    history = [np.sqrt(rz)]
    rnorm = bnorm
    k = 0
    while k < max_iter:
        Ap = spmv(A, p)
        pAp = p @ Ap
        if pAp <= 0.0:
            raise InvalidMatrixError("matrix is not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        k += 1
        rnorm = np.linalg.norm(r)
        z = inv_diag * r
        rz_new = r @ z
        history.append(np.sqrt(max(rz_new, 0.0)))
        if rnorm <= stop:
            return x, SolveReport(k, rnorm / bnorm, True, history)
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise ConvergenceError(SolveReport(k, rnorm / bnorm, False, history))
