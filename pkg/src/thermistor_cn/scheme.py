"""Linearized, uncoupled Crank-Nicolson Galerkin stepping for the thermistor system.

One step from t_n to t_{n+1}:

1. extrapolate the temperature to the half level,
   Uhat = (3 U^n - U^{n-1}) / 2  (a start-up Euler half step when n = 0);
2. potential: find Phi^{n+1/2} = g(t_{n+1/2}) on the boundary with
   (sigma(Uhat) grad Phi, grad v) = (f2(t_{n+1/2}), v);
3. temperature: find U^{n+1} = u(t_{n+1}) on the boundary with
   (M + tau/2 A) U^{n+1} = (M - tau/2 A) U^n
                           + tau (sigma(Uhat) |grad Phi|^2 + f1(t_{n+1/2}), v).

Both solves are linear and SPD; nothing is iterated within a step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fem import (
    DofMap,
    Integrand,
    apply_dirichlet,
    assemble_flux_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    interpolate,
)
from .linalg import ConvergenceError, SolverConfig, solve_spd
from .mesh import build_mesh
from .mms import ErrorRecord, error_norms
from .quadrature import simplex_rule

log = logging.getLogger(__name__)

SEMI_IMPLICIT = "semi_implicit"
EXPLICIT = "explicit"
# Lebesgue exponent of the potential error bound
PHI_P = 12.0 / 5.0


class ModelViolationError(ValueError):
    """Conductivity left its admissible bracket [sigma_1, sigma_2]."""


class SchemeError(RuntimeError):
    def __init__(self, step, report, message):
        self.step = step
        self.report = report
        super().__init__(f"step {step}: {message}")


@dataclass(frozen=True)
class SchemeConfig:
    T: float
    tau: float
    M: int
    dim: int = 2
    degree: int = 1
    half_step_init: str = SEMI_IMPLICIT
    report_times: tuple = (1.0, 2.0, 3.0, 4.0)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.tau <= 0 or self.T <= 0:
            raise ValueError("T and tau must be positive")
        if abs(self.T / self.tau - round(self.T / self.tau)) > 1e-9 * max(1.0, self.T / self.tau):
            raise ValueError(f"T/tau = {self.T / self.tau} is not an integer")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if self.half_step_init not in (SEMI_IMPLICIT, EXPLICIT):
            raise ValueError(f"unknown half-step initializer {self.half_step_init!r}")
        for t in self.report_times:
            self.step_of(t)

    @property
    def N(self):
        return int(round(self.T / self.tau))

    def step_of(self, t):
        n = round(t / self.tau)
        if abs(n * self.tau - t) > 1e-9 * max(1.0, t) or not 0 <= n <= self.N:
            raise ValueError(f"report time {t} is not a time level of the grid")
        return int(n)


@dataclass
class SchemeState:
    n: int
    tau: float
    U_curr: np.ndarray
    U_prev: np.ndarray | None = None
    Phi_half: np.ndarray | None = None  # Phi^{n-1/2}, the latest potential
    Phi_half_prev: np.ndarray | None = None  # Phi^{n-3/2}
    U_hat_half: np.ndarray | None = None  # start-up value for Uhat^{1/2}
    Phi0: np.ndarray | None = None

    @property
    def t(self):
        return self.n * self.tau


def extrapolate_half(U_curr, U_prev):
    """Second-order extrapolation (3 U^n - U^{n-1}) / 2 to t_{n+1/2}."""
    if U_prev is None:
        raise ValueError("extrapolation needs two time levels; use the start-up half step at n = 0")
    return 1.5 * np.asarray(U_curr) - 0.5 * np.asarray(U_prev)


class ThermistorScheme:
    """Discrete operators of one (mesh, degree, tau) combination.

    The constant matrices (mass, Laplacian, the Crank-Nicolson pair) are
    assembled once; the conductivity-weighted stiffness is rebuilt every step.
    """

    def __init__(self, dofmap: DofMap, case, tau, solver=None, load_degree=4):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.dofmap = dofmap
        self.case = case
        self.tau = tau
        self.solver = solver or SolverConfig()
        self.load_degree = load_degree
        self.coeff_degree = 2 * dofmap.degree
        self.mass = assemble_mass(dofmap)
        self.lap = assemble_stiffness(dofmap)
        self.cn_left = self.mass + (tau / 2) * self.lap
        self.cn_right = self.mass - (tau / 2) * self.lap
        self.reports = []

    # -- helpers -------------------------------------------------------------

    def _solve(self, system, what):
        try:
            x, report = solve_spd(system.matrix, system.rhs, self.solver)
        except ConvergenceError as exc:
            raise SchemeError(getattr(self, "_step", -1), exc.report, f"{what} solve failed: {exc}")
        self.reports.append((what, report))
        return system.expand(x), report

    def _checked_sigma(self, values):
        s = self.case.sigma(values)
        lo, hi = self.case.sigma_bounds
        if np.any(s < lo) or np.any(s > hi) or not np.all(np.isfinite(s)):
            raise ModelViolationError(
                f"sigma outside [{lo}, {hi}]: range [{np.min(s):.4g}, {np.max(s):.4g}]"
            )
        return s

    def conductivity(self, U):
        """sigma of a discrete temperature field, evaluated at quadrature points."""
        rule = simplex_rule(self.dofmap.dim, self.coeff_degree)
        return Integrand(lambda x, cells: self._checked_sigma(self.dofmap.field_values(U, rule, cells)))

    def joule_heat(self, U, Phi, t):
        """sigma(U) |grad Phi|^2 + f1(t) as a load integrand."""
        rule = simplex_rule(self.dofmap.dim, self.load_degree)
        dm = self.dofmap

        def integrand(x, cells):
            s = self._checked_sigma(dm.field_values(U, rule, cells))
            gp = dm.field_gradients(Phi, rule, cells)
            return s * np.sum(gp * gp, axis=-1) + self.case.f1(x, t)

        return Integrand(integrand)

    def boundary(self, field_fn, t):
        return interpolate(self.dofmap, lambda x: field_fn(x, t))

    # -- the three solves ----------------------------------------------------

    def solve_potential(self, coeff, t):
        dm = self.dofmap
        K = assemble_stiffness(dm, coeff, degree=self.coeff_degree)
        rhs = assemble_load(dm, lambda x: self.case.f2(x, t), degree=self.load_degree)
        system = apply_dirichlet(K, rhs, dm, self.boundary(self.case.g, t))
        return self._solve(system, "potential")

    def potential_step(self, U_hat, t_half):
        return self.solve_potential(self.conductivity(U_hat), t_half)

    def temperature_step(self, U_n, U_hat, Phi_half, t_n):
        tau = self.tau
        t_half = t_n + tau / 2
        load = assemble_load(self.dofmap, self.joule_heat(U_hat, Phi_half, t_half), degree=self.load_degree)
        rhs = self.cn_right @ U_n + tau * load
        system = apply_dirichlet(self.cn_left, rhs, self.dofmap, self.boundary(self.case.u, t_n + tau))
        return self._solve(system, "temperature")

    def initialize(self, variant=SEMI_IMPLICIT):
        dm, case, tau = self.dofmap, self.case, self.tau
        U0 = interpolate(dm, case.u0)
        sigma0 = Integrand(lambda x, cells: self._checked_sigma(case.u0(x)))
        Phi0, _ = self.solve_potential(sigma0, 0.0)

        rule = simplex_rule(dm.dim, self.load_degree)

        def heat0(x, cells):
            gp = dm.field_gradients(Phi0, rule, cells)
            return self._checked_sigma(case.u0(x)) * np.sum(gp * gp, axis=-1) + case.f1(x, 0.0)

        rhs = assemble_load(dm, case.u0, degree=self.load_degree) + (tau / 2) * assemble_load(
            dm, Integrand(heat0), degree=self.load_degree
        )
        if variant == SEMI_IMPLICIT:
            matrix = self.mass + (tau / 2) * self.lap
        elif variant == EXPLICIT:
            matrix = self.mass
            rhs = rhs - (tau / 2) * assemble_flux_load(
                dm, lambda x: case.grad_u(x, 0.0), degree=self.load_degree
            )
        else:
            raise ValueError(f"unknown half-step initializer {variant!r}")
        system = apply_dirichlet(matrix, rhs, dm, self.boundary(case.u, tau / 2))
        U_hat, _ = self._solve(system, "start-up")
        return SchemeState(n=0, tau=tau, U_curr=U0, U_hat_half=U_hat, Phi0=Phi0)

    def step(self, state):
        """Advance one time level; returns the new state."""
        self._step = state.n
        U_hat = state.U_hat_half if state.n == 0 else extrapolate_half(state.U_curr, state.U_prev)
        t_n = state.n * self.tau
        Phi, _ = self.potential_step(U_hat, t_n + self.tau / 2)
        U_next, _ = self.temperature_step(state.U_curr, U_hat, Phi, t_n)
        return SchemeState(
            n=state.n + 1,
            tau=self.tau,
            U_curr=U_next,
            U_prev=state.U_curr,
            Phi_half=Phi,
            Phi_half_prev=state.Phi_half,
            Phi0=state.Phi0,
        )

    def lookahead_potential(self, state):
        """Phi^{n+1/2} from the current state without advancing the temperature."""
        self._step = state.n
        U_hat = state.U_hat_half if state.n == 0 else extrapolate_half(state.U_curr, state.U_prev)
        Phi, _ = self.potential_step(U_hat, (state.n + 0.5) * self.tau)
        return Phi

    # -- diagnostics -----------------------------------------------------------

    def errors(self, t, U, Phi, Phi_half=None):
        """ErrorRecord at integer time t (Phi is the averaged Phi^n)."""
        dm, case = self.dofmap, self.case
        eu = error_norms(dm, U, case.u, case.grad_u, t=t)
        ep = error_norms(dm, Phi, case.phi, case.grad_phi, t=t, p=PHI_P)
        rec = ErrorRecord(t, eu.l2, eu.h1, ep.l2, ep.h1, ep.lp, ep.w1p_semi)
        if Phi_half is not None:
            eh = error_norms(dm, Phi_half, case.phi, case.grad_phi, t=t - self.tau / 2, p=PHI_P)
            rec.extra.update(
                phi_half_l2=eh.l2, phi_half_h1=eh.h1, phi_half_lp=eh.lp, phi_half_w1p=eh.w1p_semi
            )
        return rec


@dataclass
class RunResult:
    config: SchemeConfig
    records: list
    final: SchemeState
    Phi_final: np.ndarray | None
    dofmap: DofMap
    iterations: dict

    def record_at(self, t):
        for r in self.records:
            if abs(r.t - t) < 1e-9:
                return r
        raise KeyError(t)


def run(config, case, dofmap=None, on_step=None):
    """Integrate to ``config.T`` and record errors at ``config.report_times``.

    The potential at an integer level is the average of the two neighbouring
    half-level potentials; for the last level one extra potential solve is
    made from the final state.
    """
    if case.dim != config.dim:
        raise ValueError(f"case is {case.dim}D but config asks for {config.dim}D")
    if dofmap is None:
        dofmap = DofMap(build_mesh(config.dim, config.M), config.degree)
    scheme = ThermistorScheme(dofmap, case, config.tau, config.solver)
    report_steps = {config.step_of(t): t for t in config.report_times}
    state = scheme.initialize(config.half_step_init)
    records = []
    Phi_final = None

    def record(n, U, Phi_prev_half, Phi_next_half):
        Phi_n = 0.5 * (Phi_prev_half + Phi_next_half)
        rec = scheme.errors(report_steps[n], U, Phi_n, Phi_prev_half)
        records.append(rec)
        log.info("t=%g  |U-u|=%.4e  |Phi-phi|=%.4e", rec.t, rec.u_l2, rec.phi_l2)
        return Phi_n

    if 0 in report_steps:
        records.append(scheme.errors(0.0, state.U_curr, state.Phi0))

    for n in range(config.N):
        new = scheme.step(state)
        # Phi^{n+1/2} is now known, so level n can be reported
        if n in report_steps and n > 0:
            record(n, state.U_curr, state.Phi_half, new.Phi_half)
        state = new
        if on_step is not None:
            on_step(state)

    if config.N > 0:
        Phi_next = scheme.lookahead_potential(state)
        Phi_final = 0.5 * (state.Phi_half + Phi_next)
        if config.N in report_steps:
            record(config.N, state.U_curr, state.Phi_half, Phi_next)

    iterations = {}
    for what, rep in scheme.reports:
        iterations.setdefault(what, []).append(rep.iterations)
    return RunResult(config, records, state, Phi_final, dofmap, iterations)
