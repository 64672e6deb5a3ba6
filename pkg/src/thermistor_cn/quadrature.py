"""Quadrature rules on the reference simplex.

Low degrees use the classical fully symmetric rules (3/6 points on the
triangle, 4/14 on the tetrahedron). Anything else falls back to a Stroud
conical product: Gauss-Jacobi points collapsed onto the simplex by the Duffy
map. All weights are positive.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates, weights on the reference simplex.

    The weights sum to the reference volume 1/d!.
    """

    barycentric: np.ndarray  # (n_points, dim + 1)
    weights: np.ndarray  # (n_points,)
    degree: int

    @property
    def dim(self):
        return self.barycentric.shape[1] - 1

    @property
    def points(self):
        """Cartesian points on the reference simplex (origin + unit vectors)."""
        return self.barycentric[:, 1:]

    def __len__(self):
        return len(self.weights)


def _orbit(bary):
    return sorted(set(itertools.permutations(bary)))


def _s31(a):
    return _orbit((a, a, a, 1.0 - 3.0 * a))


def _s21(a):
    return _orbit((a, a, 1.0 - 2.0 * a))


# (dim, degree) -> [(orbit points, weight per point)]
_SYMMETRIC = {
    (2, 2): [(_s21(1.0 / 6.0), 1.0 / 6.0)],
    (2, 4): [
        (_s21(0.09157621350977119), 0.05497587182766089),
        (_s21(0.4459484909159649), 0.11169079483900579),
    ],
    (3, 2): [(_s31(0.1381966011250105), 1.0 / 24.0)],
    (3, 5): [
        (_s31(0.09273525031089114), 0.012248840519393631),
        (_s31(0.3108859192633004), 0.018781320953002542),
        (_orbit((0.4544962958743497,) * 2 + (0.5 - 0.4544962958743497,) * 2), 0.007091003462847004),
    ],
}


def _symmetric_rule(dim, degree):
    for (d, deg), orbits in sorted(_SYMMETRIC.items()):
        if d == dim and deg >= degree:
            bary = np.array([p for pts, _ in orbits for p in pts])
            w = np.array([wt for pts, wt in orbits for _ in pts])
            return bary, w, deg
    return None


def _gauss_jacobi_01(n, alpha):
    """n-point rule on [0, 1] for the weight (1 - s)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@functools.lru_cache(maxsize=None)
def simplex_rule(dim, degree):
    """Rule integrating polynomials of total degree <= ``degree`` exactly."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if degree <= 1:
        bary = np.full((1, dim + 1), 1.0 / (dim + 1))
        w = np.array([1.0 / math.factorial(dim)])
        return QuadratureRule(bary, w, degree)

    sym = _symmetric_rule(dim, degree)
    if sym is not None:
        bary, w, exact = sym
        bary.setflags(write=False)
        w.setflags(write=False)
        return QuadratureRule(bary, w, exact)

    n = (degree + 2) // 2
    rules = [_gauss_jacobi_01(n, dim - 1 - k) for k in range(dim)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    s = [g.ravel() for g in grids]
    w = np.prod([g.ravel() for g in wgrids], axis=0)

    # Duffy collapse: x_k = s_k * prod_{j<k} (1 - s_j)
    xs = []
    scale = np.ones_like(s[0])
    for k in range(dim):
        xs.append(s[k] * scale)
        scale = scale * (1.0 - s[k])
    x = np.stack(xs, axis=1)
    bary = np.hstack([1.0 - x.sum(axis=1, keepdims=True), x])
    bary.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(bary, w, degree)


def monomial_integral(exponents):
    """Exact integral of prod x_k^a_k over the reference simplex.

    Uses the Dirichlet formula prod(a_k!) / (d + sum a_k)!.
    """
    exponents = list(exponents)
    d = len(exponents)
    num = math.prod(math.factorial(a) for a in exponents)
    return num / math.factorial(d + sum(exponents))
