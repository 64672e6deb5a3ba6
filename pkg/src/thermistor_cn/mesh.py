"""Structured simplicial meshes of the unit square and unit cube.

Every cell of the uniform M^d grid is split into d! simplices by the Kuhn
(Freudenthal) decomposition: one simplex per ordering of the coordinate
axes, all sharing the cell diagonal from the lower corner to the upper one.
In 2D this is the "same diagonal everywhere" triangulation with 2M^2
triangles; in 3D it gives 6M^3 tetrahedra.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


@functools.lru_cache(maxsize=None)
def _kuhn_paths(dim):
    """Local corner offsets of the d! Kuhn simplices of the unit cell.

    Returned together with the axis permutations so that point location can
    map sorted local coordinates back to a simplex index.
    """
    perms = list(itertools.permutations(range(dim)))
    paths = []
    for perm in perms:
        corner = np.zeros(dim, dtype=np.int64)
        verts = [corner.copy()]
        for axis in perm:
            corner[axis] += 1
            verts.append(corner.copy())
        verts = np.array(verts)
        # positive orientation: swap the last two vertices if needed
        det = np.linalg.det((verts[1:] - verts[0]).astype(float))
        if det < 0:
            verts[[-2, -1]] = verts[[-1, -2]]
        paths.append(verts)
    return perms, np.array(paths)


@functools.lru_cache(maxsize=None)
def _perm_table(dim):
    """Map base-``dim`` encoded axis orderings to Kuhn simplex numbers."""
    perms, _ = _kuhn_paths(dim)
    table = np.full(dim**dim, -1, dtype=np.int64)
    for i, p in enumerate(perms):
        table[sum(a * dim**k for k, a in enumerate(p))] = i
    return table


@dataclass(frozen=True)
class Mesh:
    """Immutable structured mesh of (0, 1)^dim.

    ``grid`` holds the integer lattice index of every node so that
    coordinates are ``grid / M`` exactly.
    """

    dim: int
    M: int
    grid: np.ndarray  # (n_nodes, dim) int
    simplices: np.ndarray  # (n_simplices, dim + 1) int
    nodes: np.ndarray = field(init=False)
    boundary_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", self.grid / self.M)
        on_bnd = np.any((self.grid == 0) | (self.grid == self.M), axis=1)
        object.__setattr__(self, "boundary_nodes", on_bnd)
        for arr in (self.grid, self.simplices, self.nodes, self.boundary_nodes):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_simplices(self):
        return len(self.simplices)

    @property
    def h(self):
        return mesh_size(self)

    def node_index(self, idx):
        """Flat node number of lattice index ``idx`` (..., dim)."""
        idx = np.asarray(idx)
        flat = np.zeros(idx.shape[:-1], dtype=np.int64)
        for k in reversed(range(self.dim)):
            flat = flat * (self.M + 1) + idx[..., k]
        return flat

    def jacobians(self):
        """Edge matrices J with columns x_k - x_0, shape (n_simplices, dim, dim)."""
        x = self.nodes[self.simplices]
        return np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))

    def volumes(self):
        return np.linalg.det(self.jacobians()) / math.factorial(self.dim)

    def locate(self, points):
        """Index of a simplex containing each point, by closed-form cell lookup."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise MeshError(f"points must have {self.dim} coordinates")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise MeshError("point outside the unit box")
        scaled = pts * self.M
        cell = np.minimum(np.floor(scaled).astype(np.int64), self.M - 1)
        local = scaled - cell
        order = np.argsort(-local, axis=1, kind="stable")
        perm_ids = _perm_table(self.dim)[order @ (self.dim ** np.arange(self.dim))]
        cell_flat = np.zeros(len(pts), dtype=np.int64)
        for k in reversed(range(self.dim)):
            cell_flat = cell_flat * self.M + cell[:, k]
        return cell_flat * math.factorial(self.dim) + perm_ids

    def facets(self):
        """Sorted facet vertex tuples with their multiplicity."""
        faces = []
        for omit in range(self.dim + 1):
            keep = [k for k in range(self.dim + 1) if k != omit]
            faces.append(np.sort(self.simplices[:, keep], axis=1))
        faces = np.concatenate(faces)
        uniq, counts = np.unique(faces, axis=0, return_counts=True)
        return uniq, counts

    def write_text(self, path):
        """Plain-text dump: node coordinates, then simplex vertex lists."""
        with open(path, "w") as fh:
            for x in self.nodes:
                fh.write(" ".join(f"{c:.17g}" for c in x) + "\n")
            for s in self.simplices:
                fh.write(" ".join(str(int(v)) for v in s) + "\n")


def build_mesh(dim, M):
    if dim not in (2, 3):
        raise MeshError(f"dimension must be 2 or 3, got {dim}")
    if int(M) != M or M < 1:
        raise MeshError(f"M must be a positive integer, got {M}")
    M = int(M)
    axes = [np.arange(M + 1)] * dim
    # node numbering: x fastest, then y, then z
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    grid = np.transpose(grid, tuple(reversed(range(dim))) + (dim,)).reshape(-1, dim)
    grid = np.ascontiguousarray(grid, dtype=np.int64)

    cells = np.stack(np.meshgrid(*[np.arange(M)] * dim, indexing="ij"), axis=-1)
    cells = np.transpose(cells, tuple(reversed(range(dim))) + (dim,)).reshape(-1, dim)
    _, paths = _kuhn_paths(dim)
    corners = cells[:, None, None, :] + paths[None, :, :, :]
    corners = corners.reshape(-1, dim + 1, dim)

    flat = np.zeros(corners.shape[:-1], dtype=np.int64)
    for k in reversed(range(dim)):
        flat = flat * (M + 1) + corners[..., k]
    return Mesh(dim=dim, M=M, grid=grid, simplices=flat)


def build_mesh_2d(M):
    return build_mesh(2, M)


def build_mesh_3d(M):
    return build_mesh(3, M)


def mesh_size(mesh):
    """Largest simplex diameter."""
    x = mesh.nodes[mesh.simplices]
    h = 0.0
    for a, b in itertools.combinations(range(mesh.dim + 1), 2):
        h = max(h, float(np.max(np.linalg.norm(x[:, a] - x[:, b], axis=1))))
    return h
