"""Lagrange P1/P2 elements, degree-of-freedom maps and assembly.

Fields handed to the assembly routines ("coefficients", "integrands") may be

* a number,
* a plain callable ``f(x)`` of physical points ``x`` with shape (..., dim),
* an :class:`Integrand`, i.e. a callable ``f(x, cells)`` that also receives
  the indices of the simplices whose quadrature points are in ``x``. This is
  how discrete finite element fields get composed into a form, e.g. the
  Joule heating term sigma(U_h) |grad Phi_h|^2.

Element matrices are summed into a fixed CSR pattern with ``np.bincount``,
so results do not depend on anything but the mesh and the inputs.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import CsrMatrix
from .mesh import Mesh
from .quadrature import simplex_rule

# quadrature points processed per batch in the element loops
_BATCH_POINTS = 1 << 20


class DegenerateCoefficientError(ValueError):
    """A diffusion coefficient is not strictly positive somewhere."""


class Integrand:
    """Wraps ``fn(x, cells)`` so assembly passes the simplex indices along."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, x, cells):
        return self.fn(x, cells)


# ---------------------------------------------------------------------------
# reference element


class ReferenceElement:
    """Lagrange element of degree 1 or 2 on the reference simplex.

    Local dof order: the d+1 vertices, then (P2) the edge midpoints in
    ``itertools.combinations`` order of the vertex pairs.
    """

    def __init__(self, dim, degree):
        if degree not in (1, 2):
            raise ValueError(f"only P1 and P2 are supported, got degree {degree}")
        self.dim = dim
        self.degree = degree
        self.edges = list(itertools.combinations(range(dim + 1), 2))
        self.n_basis = dim + 1 if degree == 1 else dim + 1 + len(self.edges)

    def __repr__(self):
        return f"ReferenceElement(dim={self.dim}, degree={self.degree})"

    @property
    def dof_barycentric(self):
        eye = np.eye(self.dim + 1)
        if self.degree == 1:
            return eye
        mids = [(eye[i] + eye[j]) / 2 for i, j in self.edges]
        return np.vstack([eye, mids])

    def values(self, bary):
        bary = np.atleast_2d(bary)
        if self.degree == 1:
            return bary.copy()
        vert = bary * (2.0 * bary - 1.0)
        edge = np.stack([4.0 * bary[:, i] * bary[:, j] for i, j in self.edges], axis=1)
        return np.hstack([vert, edge])

    def bary_derivatives(self, bary):
        """d phi_b / d lambda_k, shape (n_points, n_basis, dim + 1)."""
        bary = np.atleast_2d(bary)
        nq, nl = bary.shape
        if self.degree == 1:
            return np.broadcast_to(np.eye(nl), (nq, nl, nl)).copy()
        out = np.zeros((nq, self.n_basis, nl))
        for i in range(nl):
            out[:, i, i] = 4.0 * bary[:, i] - 1.0
        for e, (i, j) in enumerate(self.edges):
            out[:, nl + e, i] = 4.0 * bary[:, j]
            out[:, nl + e, j] = 4.0 * bary[:, i]
        return out

    def reference_gradients(self, bary):
        """Gradients w.r.t. the reference coordinates, (n_points, n_basis, dim)."""
        dlam = np.vstack([-np.ones(self.dim), np.eye(self.dim)])
        return self.bary_derivatives(bary) @ dlam


# ---------------------------------------------------------------------------
# dof map


class DofMap:
    """Global numbering of Lagrange dofs on a structured mesh.

    Dof positions are kept as integers on the 2M lattice (vertices at even
    indices, P2 edge midpoints at half-integers of the mesh lattice), which
    makes the boundary test exact.
    """

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        self.element = ReferenceElement(mesh.dim, degree)
        if degree == 1:
            cell_dofs = np.array(mesh.simplices)
            lattice = 2 * mesh.grid
        else:
            pairs = np.stack(
                [np.sort(mesh.simplices[:, [i, j]], axis=1) for i, j in self.element.edges],
                axis=1,
            )
            edges, inverse = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
            inverse = inverse.reshape(len(mesh.simplices), -1)
            cell_dofs = np.hstack([mesh.simplices, mesh.n_nodes + inverse])
            lattice = np.vstack([2 * mesh.grid, mesh.grid[edges[:, 0]] + mesh.grid[edges[:, 1]]])
        self.cell_dofs = np.ascontiguousarray(cell_dofs, dtype=np.int64)
        self.lattice = lattice
        self.coords = lattice / (2.0 * mesh.M)
        self.dirichlet_mask = np.any((lattice == 0) | (lattice == 2 * mesh.M), axis=1)
        for arr in (self.cell_dofs, self.lattice, self.coords, self.dirichlet_mask):
            arr.setflags(write=False)

    def __repr__(self):
        return f"DofMap(dim={self.dim}, M={self.mesh.M}, degree={self.degree}, n_dofs={self.n_dofs})"

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def n_dofs(self):
        return len(self.coords)

    @property
    def n_cells(self):
        return len(self.cell_dofs)

    @functools.cached_property
    def free(self):
        return np.flatnonzero(~self.dirichlet_mask)

    @functools.cached_property
    def detJ(self):
        return np.linalg.det(self.mesh.jacobians())

    @functools.cached_property
    def bary_grads(self):
        """Physical gradients of the barycentric coordinates, (n_cells, d+1, d)."""
        inv = np.linalg.inv(self.mesh.jacobians())
        return np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)

    @functools.cached_property
    def pattern(self):
        """CSR pattern of all element couplings plus the scatter index."""
        nb = self.element.n_basis
        rows = np.repeat(self.cell_dofs, nb, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, nb)).ravel()
        keys = rows * self.n_dofs + cols
        uniq, scatter = np.unique(keys, return_inverse=True)
        urows = uniq // self.n_dofs
        indptr = np.zeros(self.n_dofs + 1, dtype=np.int64)
        np.cumsum(np.bincount(urows, minlength=self.n_dofs), out=indptr[1:])
        return indptr, uniq % self.n_dofs, scatter.ravel()

    @functools.cached_property
    def reduction(self):
        indptr, indices, _ = self.pattern
        return _Reduction(indptr, indices, self.dirichlet_mask)

    def batches(self, n_points):
        step = max(1, _BATCH_POINTS // max(n_points, 1))
        for start in range(0, self.n_cells, step):
            yield np.arange(start, min(start + step, self.n_cells))

    # -- quadrature-point evaluation ---------------------------------------

    def quad_points(self, rule, cells):
        x = self.mesh.nodes[self.mesh.simplices[cells]]  # (nc, d+1, d)
        return rule.barycentric @ x

    def basis_gradients(self, rule, cells):
        """(nc, nq, n_basis, d)"""
        dphi = self.element.bary_derivatives(rule.barycentric)  # (nq, nb, d+1)
        return dphi[None] @ self.bary_grads[cells][:, None]

    @functools.cached_property
    def p1_grad_products(self):
        """grad lambda_b . grad lambda_e per cell, (n_cells, d+1, d+1)."""
        g = self.bary_grads
        return g @ g.transpose(0, 2, 1)

    def field_values(self, coeffs, rule, cells):
        phi = self.element.values(rule.barycentric)
        return coeffs[self.cell_dofs[cells]] @ phi.T

    def field_gradients(self, coeffs, rule, cells):
        local = coeffs[self.cell_dofs[cells]]  # (nc, nb)
        G = self.bary_grads[cells]
        if self.degree == 1:
            grad = (local[:, None, :] @ G)[:, 0, :]
            return np.broadcast_to(grad[:, None, :], (len(cells), len(rule), self.dim))
        dphi = self.element.bary_derivatives(rule.barycentric)
        dlam = np.tensordot(local, dphi, axes=([1], [1]))  # (nc, nq, d+1)
        return dlam @ G


def build_dofmap(mesh, degree):
    return DofMap(mesh, degree)


def _evaluate(field, dofmap, rule, cells):
    """Values of ``field`` at the quadrature points of ``cells``, (nc, nq)."""
    shape = (len(cells), len(rule))
    if np.isscalar(field):
        return np.full(shape, float(field))
    x = dofmap.quad_points(rule, cells)
    vals = field(x, cells) if isinstance(field, Integrand) else field(x)
    return np.broadcast_to(np.asarray(vals, dtype=float), shape)


def _default_degree(dofmap, extra):
    return 2 * dofmap.degree + extra


# ---------------------------------------------------------------------------
# assembly


def _scatter(dofmap, local):
    indptr, indices, scatter = dofmap.pattern
    data = np.bincount(scatter, weights=local.ravel(), minlength=len(indices))
    return CsrMatrix(indptr, indices, data, dofmap.n_dofs)


def assemble_stiffness(dofmap, coeff=1.0, degree=None, check_positive=True):
    """Matrix of (coeff grad phi_j, grad phi_i) over all dofs.

    ``degree`` is the quadrature exactness (default 2 for P1, 4 for P2).
    """
    rule = simplex_rule(dofmap.dim, degree if degree is not None else 2 * dofmap.degree)
    nb = dofmap.element.n_basis
    local = np.empty((dofmap.n_cells, nb, nb))
    wdet = rule.weights[None, :] * np.abs(dofmap.detJ)[:, None]  # (ne, nq)
    for cells in dofmap.batches(len(rule)):
        c = _evaluate(coeff, dofmap, rule, cells)
        if check_positive and not np.all(c > 0.0):
            raise DegenerateCoefficientError(
                f"coefficient not strictly positive (min {np.min(c):.3e})"
            )
        cw = c * wdet[cells]
        if dofmap.degree == 1:
            local[cells] = cw.sum(axis=1)[:, None, None] * dofmap.p1_grad_products[cells]
        else:
            g = dofmap.basis_gradients(rule, cells).transpose(0, 2, 1, 3)  # (nc, nb, nq, d)
            gw = (g * cw[:, None, :, None]).reshape(len(cells), nb, -1)
            local[cells] = gw @ g.reshape(len(cells), nb, -1).transpose(0, 2, 1)
    return _scatter(dofmap, local)


def assemble_mass(dofmap, coeff=1.0, degree=None):
    """Matrix of (coeff phi_j, phi_i); exact for constant coeff by default."""
    rule = simplex_rule(dofmap.dim, degree if degree is not None else 2 * dofmap.degree)
    phi = dofmap.element.values(rule.barycentric)  # (nq, nb)
    nb = dofmap.element.n_basis
    pp = (phi[:, :, None] * phi[:, None, :]).reshape(len(rule), nb * nb)
    local = np.empty((dofmap.n_cells, nb, nb))
    wdet = rule.weights[None, :] * np.abs(dofmap.detJ)[:, None]
    for cells in dofmap.batches(len(rule)):
        cw = _evaluate(coeff, dofmap, rule, cells) * wdet[cells]
        local[cells] = (cw @ pp).reshape(len(cells), nb, nb)
    return _scatter(dofmap, local)


def assemble_load(dofmap, f, degree=4):
    """Vector of (f, phi_i) over all dofs."""
    rule = simplex_rule(dofmap.dim, degree)
    phi = dofmap.element.values(rule.barycentric)
    wdet = rule.weights[None, :] * np.abs(dofmap.detJ)[:, None]
    local = np.empty((dofmap.n_cells, dofmap.element.n_basis))
    for cells in dofmap.batches(len(rule)):
        fw = _evaluate(f, dofmap, rule, cells) * wdet[cells]
        local[cells] = fw @ phi
    return np.bincount(dofmap.cell_dofs.ravel(), weights=local.ravel(), minlength=dofmap.n_dofs)


def assemble_flux_load(dofmap, flux, degree=4):
    """Vector of (F, grad phi_i) for a vector field ``flux`` returning (..., dim)."""
    rule = simplex_rule(dofmap.dim, degree)
    wdet = rule.weights[None, :] * np.abs(dofmap.detJ)[:, None]
    local = np.empty((dofmap.n_cells, dofmap.element.n_basis))
    for cells in dofmap.batches(len(rule)):
        x = dofmap.quad_points(rule, cells)
        F = flux(x, cells) if isinstance(flux, Integrand) else flux(x)
        g = dofmap.basis_gradients(rule, cells)
        local[cells] = np.einsum("cq,cqd,cqbd->cb", wdet[cells], F, g)
    return np.bincount(dofmap.cell_dofs.ravel(), weights=local.ravel(), minlength=dofmap.n_dofs)


def integrate(dofmap, f, degree=6):
    """Integral of a field over the domain."""
    rule = simplex_rule(dofmap.dim, degree)
    total = 0.0
    for cells in dofmap.batches(len(rule)):
        vals = _evaluate(f, dofmap, rule, cells)
        total += float(np.sum(vals @ rule.weights * np.abs(dofmap.detJ[cells])))
    return total


# ---------------------------------------------------------------------------
# interpolation and point evaluation


def interpolate(dofmap, g):
    """Nodal (Lagrange) interpolant: coefficient i is g at dof i."""
    return np.asarray(g(dofmap.coords), dtype=float).reshape(dofmap.n_dofs).copy()


def evaluate_fe_field(dofmap, coeffs, points):
    """Value and gradient of a finite element field at arbitrary points.

    Returns arrays of shape (n,) and (n, dim). Points must lie in [0, 1]^dim.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cells = dofmap.mesh.locate(pts)
    x0 = dofmap.mesh.nodes[dofmap.mesh.simplices[cells, 0]]
    lam = np.einsum("ckd,cd->ck", dofmap.bary_grads[cells][:, 1:], pts - x0)
    bary = np.hstack([1.0 - lam.sum(axis=1, keepdims=True), lam])
    el = dofmap.element
    local = np.asarray(coeffs)[dofmap.cell_dofs[cells]]
    values = np.einsum("cb,cb->c", local, el.values(bary))
    dlam = np.einsum("cb,cbk->ck", local, el.bary_derivatives(bary))
    grads = np.einsum("ck,ckd->cd", dlam, dofmap.bary_grads[cells])
    return values, grads


# ---------------------------------------------------------------------------
# Dirichlet lifting


class _Reduction:
    """Index bookkeeping to restrict a CSR pattern to free rows/columns."""

    def __init__(self, indptr, indices, dirichlet_mask):
        n = len(indptr) - 1
        free = ~dirichlet_mask
        rows = np.repeat(np.arange(n), np.diff(indptr))
        self.indptr_full = indptr
        self.indices_full = indices
        self.free = np.flatnonzero(free)
        self.fixed = np.flatnonzero(dirichlet_mask)
        new_id = np.cumsum(free) - 1
        keep = free[rows] & free[indices]
        self.keep = np.flatnonzero(keep)
        new_rows = new_id[rows[keep]]
        self.n_free = len(self.free)
        self.indptr = np.zeros(self.n_free + 1, dtype=np.int64)
        np.cumsum(np.bincount(new_rows, minlength=self.n_free), out=self.indptr[1:])
        self.indices = new_id[indices[keep]]
        couple = free[rows] & dirichlet_mask[indices]
        self.couple = np.flatnonzero(couple)
        self.couple_rows = new_id[rows[couple]]
        self.couple_cols = indices[couple]


@dataclass
class AssembledSystem:
    """Free-dof system left after eliminating the Dirichlet dofs."""

    matrix: CsrMatrix
    rhs: np.ndarray
    free: np.ndarray
    boundary_values: np.ndarray  # full-length vector, meaningful on Dirichlet dofs

    def expand(self, x_free):
        out = np.array(self.boundary_values, dtype=float, copy=True)
        out[self.free] = x_free
        return out


def apply_dirichlet(A, rhs, dofmap, boundary_values):
    """Restrict ``A u = rhs`` to free dofs with u fixed on the Dirichlet dofs.

    ``boundary_values`` is a full-length vector; only its Dirichlet entries
    are read.
    """
    red = dofmap.reduction
    if not (A.indptr is red.indptr_full or np.array_equal(A.indptr, red.indptr_full)) or not (
        A.indices is red.indices_full or np.array_equal(A.indices, red.indices_full)
    ):
        red = _Reduction(A.indptr, A.indices, dofmap.dirichlet_mask)
    g = np.where(dofmap.dirichlet_mask, np.asarray(boundary_values, dtype=float), 0.0)
    lift = np.bincount(
        red.couple_rows, weights=A.data[red.couple] * g[red.couple_cols], minlength=red.n_free
    )
    reduced = CsrMatrix(red.indptr, red.indices, A.data[red.keep], red.n_free)
    return AssembledSystem(reduced, np.asarray(rhs, dtype=float)[red.free] - lift, red.free, g)
