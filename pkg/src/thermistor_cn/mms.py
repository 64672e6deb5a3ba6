"""Manufactured solutions, conductivity models and error norms.

Both cases solve

    u_t - Lap u = sigma(u) |grad phi|^2 + f1,     -div(sigma(u) grad phi) = f2

on the unit square / cube with sigma(u) = 1/(1+u^2) + 1 and Dirichlet data
taken from the exact solution. The forcings are written out by hand below;
``check_forcings`` re-derives them with finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import simplex_rule

Field = Callable[..., np.ndarray]


def sigma(s):
    return 1.0 / (1.0 + s * s) + 1.0


def dsigma(s):
    return -2.0 * s / (1.0 + s * s) ** 2


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields of one test problem; every field is ``f(x, t)``."""

    name: str
    dim: int
    u: Field
    grad_u: Field
    phi: Field
    grad_phi: Field
    f1: Field
    f2: Field
    sigma: Callable[[np.ndarray], np.ndarray] = sigma
    dsigma: Callable[[np.ndarray], np.ndarray] = dsigma
    sigma_bounds: tuple = (1.0, 2.0)

    def u0(self, x):
        return self.u(x, 0.0)

    def g(self, x, t):
        """Boundary data for the potential."""
        return self.phi(x, t)


def _xyz(x):
    x = np.asarray(x, dtype=float)
    return [x[..., k] for k in range(x.shape[-1])]


def case_2d():
    """u = exp(x+y-t), phi = 1 + sin(x+y+t) on the unit square."""

    def u(x, t):
        X, Y = _xyz(x)
        return np.exp(X + Y - t)

    def grad_u(x, t):
        v = u(x, t)
        return np.stack([v, v], axis=-1)

    def phi(x, t):
        X, Y = _xyz(x)
        return 1.0 + np.sin(X + Y + t)

    def grad_phi(x, t):
        X, Y = _xyz(x)
        c = np.cos(X + Y + t)
        return np.stack([c, c], axis=-1)

    def f1(x, t):
        # u_t = -u, Lap u = 2u, |grad phi|^2 = 2 cos^2
        X, Y = _xyz(x)
        v = np.exp(X + Y - t)
        c = np.cos(X + Y + t)
        return -3.0 * v - 2.0 * sigma(v) * c * c

    def f2(x, t):
        # -sigma'(u) grad u . grad phi - sigma(u) Lap phi, Lap phi = -2 sin
        X, Y = _xyz(x)
        v = np.exp(X + Y - t)
        s = X + Y + t
        return -2.0 * dsigma(v) * v * np.cos(s) + 2.0 * sigma(v) * np.sin(s)

    return ManufacturedCase("example-2d", 2, u, grad_u, phi, grad_phi, f1, f2)


def case_3d():
    """u = exp(2x+y-z)(2t+sin t), phi = sin(x-2y) cos(z) exp(t) on the unit cube."""
    direction = np.array([2.0, 1.0, -1.0])

    def u(x, t):
        X, Y, Z = _xyz(x)
        return np.exp(2 * X + Y - Z) * (2 * t + np.sin(t))

    def grad_u(x, t):
        return u(x, t)[..., None] * direction

    def phi(x, t):
        X, Y, Z = _xyz(x)
        return np.sin(X - 2 * Y) * np.cos(Z) * np.exp(t)

    def grad_phi(x, t):
        X, Y, Z = _xyz(x)
        a = X - 2 * Y
        et = np.exp(t)
        ca = np.cos(a) * np.cos(Z) * et
        return np.stack([ca, -2.0 * ca, -np.sin(a) * np.sin(Z) * et], axis=-1)

    def f1(x, t):
        X, Y, Z = _xyz(x)
        e = np.exp(2 * X + Y - Z)
        v = e * (2 * t + np.sin(t))
        gp = grad_phi(x, t)
        return e * (2.0 + np.cos(t)) - 6.0 * v - sigma(v) * np.sum(gp * gp, axis=-1)

    def f2(x, t):
        v = u(x, t)
        gp = grad_phi(x, t)
        du_dphi = v * (gp @ direction)
        return -dsigma(v) * du_dphi + 6.0 * sigma(v) * phi(x, t)

    return ManufacturedCase("example-3d", 3, u, grad_u, phi, grad_phi, f1, f2)


def zero_case(dim):
    """All data zero; the discrete solution must vanish identically."""

    def zero(x, t):
        return np.zeros(np.shape(x)[:-1])

    def zero_vec(x, t):
        return np.zeros(np.shape(x))

    return ManufacturedCase(f"zero-{dim}d", dim, zero, zero_vec, zero, zero_vec, zero, zero)


CASES = {2: case_2d, 3: case_3d}


# ---------------------------------------------------------------------------
# finite-difference validation of the hand-derived forcings


def _d1(fn, x, k, h):
    """Fourth-order central difference of fn along axis k."""
    e = np.zeros(x.shape[-1])
    e[k] = h
    return (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)


def forcing_residuals(case, points, times, h=1e-3):
    """Max |f1 - oracle| and |f2 - oracle| (relative to max(1, |oracle|)).

    The oracle builds u_t, Lap u, grad phi and div(sigma(u) grad phi) by
    finite differences of u and phi only.
    """
    res1 = res2 = 0.0
    for x, t in zip(points, times):
        x = np.asarray(x, dtype=float)
        u = lambda y: case.u(y, t)
        p = lambda y: case.phi(y, t)
        u_t = (
            -case.u(x, t + 2 * h) + 8 * case.u(x, t + h) - 8 * case.u(x, t - h) + case.u(x, t - 2 * h)
        ) / (12 * h)
        lap_u = sum(_d1(lambda y, k=k: _d1(u, y, k, h), x, k, h) for k in range(case.dim))
        grad_p = np.array([_d1(p, x, k, h) for k in range(case.dim)])
        oracle1 = u_t - lap_u - case.sigma(u(x)) * grad_p @ grad_p

        def flux(y, k):
            return case.sigma(u(y)) * _d1(p, y, k, h)

        oracle2 = -sum(_d1(lambda y, k=k: flux(y, k), x, k, h) for k in range(case.dim))
        res1 = max(res1, abs(case.f1(x, t) - oracle1) / max(1.0, abs(oracle1)))
        res2 = max(res2, abs(case.f2(x, t) - oracle2) / max(1.0, abs(oracle2)))
    return float(res1), float(res2)


def check_forcings(case, n=100, seed=0, tol=1e-6, t_max=4.0):
    """Raise if the closed-form forcings disagree with the oracle."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, case.dim))
    ts = rng.uniform(0.0, t_max, n)
    r1, r2 = forcing_residuals(case, pts, ts)
    if r1 > tol or r2 > tol:
        raise AssertionError(f"{case.name}: forcing mismatch f1={r1:.2e}, f2={r2:.2e}")
    return r1, r2


# ---------------------------------------------------------------------------
# error norms


@dataclass
class FieldError:
    l2: float
    h1: float
    h1_semi: float
    lp: float
    w1p_semi: float
    p: float


def error_norms(dofmap, coeffs, exact, grad_exact=None, t=None, p=2.0, degree=6):
    """Quadrature errors of a discrete field against an exact one.

    ``exact`` and ``grad_exact`` are ``f(x, t)`` when ``t`` is given, else
    ``f(x)``. Without ``grad_exact`` the gradient parts are reported as nan.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    coeffs = np.asarray(coeffs, dtype=float)
    call = (lambda f, x: f(x, t)) if t is not None else (lambda f, x: f(x))
    rule = simplex_rule(dofmap.dim, degree)
    l2 = lp = semi = w1p = 0.0
    for cells in dofmap.batches(len(rule)):
        x = dofmap.quad_points(rule, cells)
        w = rule.weights[None, :] * np.abs(dofmap.detJ[cells])[:, None]
        e = dofmap.field_values(coeffs, rule, cells) - call(exact, x)
        l2 += float(np.sum(w * e * e))
        lp += float(np.sum(w * np.abs(e) ** p))
        if grad_exact is not None:
            ge = dofmap.field_gradients(coeffs, rule, cells) - call(grad_exact, x)
            g2 = np.sum(ge * ge, axis=-1)
            semi += float(np.sum(w * g2))
            w1p += float(np.sum(w * g2 ** (p / 2)))
    if grad_exact is None:
        semi = w1p = math.nan
    return FieldError(
        l2=math.sqrt(l2),
        h1=math.sqrt(l2 + semi),
        h1_semi=math.sqrt(semi),
        lp=lp ** (1.0 / p),
        w1p_semi=w1p ** (1.0 / p),
        p=p,
    )


@dataclass
class ErrorRecord:
    t: float
    u_l2: float
    u_h1: float
    phi_l2: float
    phi_h1: float
    phi_lp: float = math.nan
    phi_w1p: float = math.nan
    extra: dict = field(default_factory=dict)

    def get(self, variable, norm):
        return getattr(self, f"{variable}_{norm}")


def estimate_order(e_coarse, e_fine, ratio=2.0):
    """Observed order from errors on two meshes whose sizes differ by ``ratio``."""
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("errors must be positive")
    return math.log(e_coarse / e_fine) / math.log(ratio)


def fit_order(sizes, errors):
    """Least-squares slope of log(error) against log(size)."""
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0) or np.any(sizes <= 0):
        raise ValueError("sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
    return float(slope)
