"""Dense reference implementations used by the tests.

Everything here works on full dense matrices and imposes Dirichlet data by
replacing rows with identity rows, which is a different route from the
elimination used by the package.
"""

import numpy as np

from thermistor_cn.fem import Integrand, assemble_flux_load, assemble_load, assemble_mass, assemble_stiffness, interpolate
from thermistor_cn.scheme import EXPLICIT


def dense_dirichlet_solve(A, b, mask, values):
    A = np.array(A, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    idx = np.flatnonzero(mask)
    A[idx, :] = 0.0
    A[idx, idx] = 1.0
    b[idx] = values[idx]
    return np.linalg.solve(A, b)


def dense_first_steps(dofmap, case, tau, variant):
    """Start-up plus two time steps computed with dense linear algebra."""
    from thermistor_cn.quadrature import simplex_rule

    d = dofmap
    mask = d.dirichlet_mask
    rule4 = simplex_rule(d.dim, 4)
    rule_c = simplex_rule(d.dim, 2 * d.degree)
    Mass = assemble_mass(d).toarray()
    Lap = assemble_stiffness(d).toarray()
    bnd = lambda fn, t: interpolate(d, lambda x: fn(x, t))

    def potential(coeff, t):
        K = assemble_stiffness(d, coeff, degree=2 * d.degree).toarray()
        rhs = assemble_load(d, lambda x: case.f2(x, t), degree=4)
        return dense_dirichlet_solve(K, rhs, mask, bnd(case.g, t))

    def sigma_of(U):
        return Integrand(lambda x, cells: case.sigma(d.field_values(U, rule_c, cells)))

    def joule(U, Phi, t):
        def fn(x, cells):
            gp = d.field_gradients(Phi, rule4, cells)
            return case.sigma(d.field_values(U, rule4, cells)) * np.sum(gp * gp, axis=-1) + case.f1(x, t)

        return assemble_load(d, Integrand(fn), degree=4)

    out = {}
    U0 = interpolate(d, case.u0)
    Phi0 = potential(Integrand(lambda x, cells: case.sigma(case.u0(x))), 0.0)
    out["Phi0"] = Phi0

    def heat0(x, cells):
        gp = d.field_gradients(Phi0, rule4, cells)
        return case.sigma(case.u0(x)) * np.sum(gp * gp, axis=-1) + case.f1(x, 0.0)

    rhs = assemble_load(d, case.u0, degree=4) + tau / 2 * assemble_load(d, Integrand(heat0), degree=4)
    if variant == EXPLICIT:
        A = Mass
        rhs = rhs - tau / 2 * assemble_flux_load(d, lambda x: case.grad_u(x, 0.0), degree=4)
    else:
        A = Mass + tau / 2 * Lap
    U_hat = dense_dirichlet_solve(A, rhs, mask, bnd(case.u, tau / 2))
    out["U_hat"] = U_hat

    left, right = Mass + tau / 2 * Lap, Mass - tau / 2 * Lap
    U_prev, U = None, U0
    for n, key_phi, key_u in ((0, "Phi_half", "U1"), (1, "Phi_3half", "U2")):
        Uh = U_hat if n == 0 else 1.5 * U - 0.5 * U_prev
        th = (n + 0.5) * tau
        Phi = potential(sigma_of(Uh), th)
        rhs = right @ U + tau * joule(Uh, Phi, th)
        U_next = dense_dirichlet_solve(left, rhs, mask, bnd(case.u, (n + 1) * tau))
        out[key_phi], out[key_u] = Phi, U_next
        U_prev, U = U, U_next
    return out
