"""Convergence, stability, error-splitting and single-run experiments."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import DofMap, assemble_mass
from .linalg import SolverConfig
from .mesh import build_mesh
from .mms import CASES, check_forcings, estimate_order, fit_order, zero_case
from .scheme import SEMI_IMPLICIT, SchemeConfig, run

log = logging.getLogger(__name__)

CSV_HEADER = ["variable", "norm", "t", "M_or_k", "error", "order"]
# (variable, norm, ErrorRecord attribute)
NORMS = [
    ("u", "L2", "u_l2"),
    ("u", "H1", "u_h1"),
    ("phi", "L2", "phi_l2"),
    ("phi", "H1", "phi_h1"),
    ("phi", "Lp", "phi_lp"),
    ("phi", "W1p", "phi_w1p"),
]
TAU_RULES = ("h", "h32", "h12", "kh")
DIVERGENCE_FACTOR = 1e3


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


def fmt_error(x):
    return f"{x:.5e}"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "converge"
    dim: int = 2
    degree: int = 1
    M: tuple = (20, 40, 80)
    tau_rule: str = "h"
    k: tuple = (1.0,)
    T: float = 4.0
    report_times: tuple = (1.0, 2.0, 3.0, 4.0)
    init: str = SEMI_IMPLICIT
    out: str | None = None
    case: str = "example"  # or "zero"
    rtol: float = 1e-10

    def __post_init__(self):
        if self.experiment not in ("converge", "stability", "split", "solve"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.degree not in (1, 2):
            raise ConfigError("degree must be 1 or 2")
        if self.tau_rule not in TAU_RULES:
            raise ConfigError(f"tau rule must be one of {TAU_RULES}")
        if not self.M or any(m < 1 for m in self.M):
            raise ConfigError("M values must be positive")
        if any(b <= a for a, b in zip(self.M, self.M[1:])):
            raise ConfigError("M list must be strictly increasing")
        if self.T <= 0 or any(t <= 0 or t > self.T + 1e-12 for t in self.report_times):
            raise ConfigError("report times must lie in (0, T]")
        if any(k <= 0 for k in self.k):
            raise ConfigError("k values must be positive")
        if self.case not in ("example", "zero"):
            raise ConfigError("case must be 'example' or 'zero'")

    def manufactured_case(self):
        return zero_case(self.dim) if self.case == "zero" else CASES[self.dim]()

    def solver(self):
        return SolverConfig(rtol=self.rtol)


def requested_tau(rule, M, k=1.0):
    """Time step from a rule in terms of h = 1/M."""
    h = 1.0 / M
    if rule == "h":
        return h
    if rule == "h32":
        return h**1.5
    if rule == "h12":
        return h**0.5
    if rule == "kh":
        return k * h
    raise ConfigError(f"unknown tau rule {rule!r}")


def adjust_tau(tau, T, report_times=()):
    """Largest tau' <= tau with T/tau' integral and every report time on the grid."""
    N = max(1, math.ceil(T / tau - 1e-9))
    while True:
        step = T / N
        if all(abs(t / step - round(t / step)) < 1e-9 * max(1.0, t / step) for t in report_times):
            return step
        N += 1


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, variable, norm, t, key, error, order=None):
        self.rows.append(dict(variable=variable, norm=norm, t=t, M_or_k=key, error=error, order=order))

    def select(self, variable, norm, t):
        return [r for r in self.rows if r["variable"] == variable and r["norm"] == norm and abs(r["t"] - t) < 1e-12]

    def errors(self, variable, norm, t):
        return [r["error"] for r in self.select(variable, norm, t)]

    def orders(self, variable, norm, t):
        return [r["order"] for r in self.select(variable, norm, t) if r["order"] is not None]

    def fitted_order(self, variable, norm, t):
        rows = self.select(variable, norm, t)
        return fit_order([1.0 / r["M_or_k"] for r in rows], [r["error"] for r in rows])

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            key = r["M_or_k"]
            key = str(int(key)) if float(key).is_integer() else repr(float(key))
            order = "" if r["order"] is None else f"{r['order']:.6f}"
            w.writerow([r["variable"], r["norm"], f"{r['t']:g}", key, fmt_error(r["error"]), order])
        text = buf.getvalue()
        if path:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _with_orders(table, keys, ratio_fn):
    """Fill pairwise orders, computed from the printed (rounded) errors."""
    groups = {}
    for r in table.rows:
        groups.setdefault((r["variable"], r["norm"], r["t"]), []).append(r)
    for rows in groups.values():
        rows.sort(key=lambda r: keys.index(r["M_or_k"]))
        for prev, cur in zip(rows, rows[1:]):
            a, b = float(fmt_error(prev["error"])), float(fmt_error(cur["error"]))
            if a > 0 and b > 0 and np.isfinite(a) and np.isfinite(b):
                cur["order"] = estimate_order(a, b, ratio_fn(prev["M_or_k"], cur["M_or_k"]))
    return table


def _gate(case):
    if not case.name.startswith("zero"):
        check_forcings(case)


def _scheme_config(cfg, M, tau):
    return SchemeConfig(
        T=cfg.T,
        tau=tau,
        M=M,
        dim=cfg.dim,
        degree=cfg.degree,
        half_step_init=cfg.init,
        report_times=tuple(cfg.report_times),
        solver=cfg.solver(),
    )


def run_convergence(cfg):
    case = cfg.manufactured_case()
    _gate(case)
    table = ConvergenceTable(
        metadata=dict(experiment="converge", dim=cfg.dim, degree=cfg.degree, tau_rule=cfg.tau_rule, taus={})
    )
    for M in cfg.M:
        tau0 = requested_tau(cfg.tau_rule, M, cfg.k[0])
        tau = adjust_tau(tau0, cfg.T, cfg.report_times)
        table.metadata["taus"][M] = (tau0, tau)
        if not math.isclose(tau, tau0, rel_tol=1e-12):
            log.info("M=%d: tau adjusted from %.6g to %.6g", M, tau0, tau)
        result = run(_scheme_config(cfg, M, tau), case)
        for rec in result.records:
            for var, norm, attr in NORMS:
                table.add(var, norm, rec.t, M, getattr(rec, attr))
    _with_orders(table, list(cfg.M), lambda a, b: b / a)
    table.metadata["diverged"] = _diverged_refinement(table)
    return table


def _diverged_refinement(table):
    for r in table.rows:
        if not np.isfinite(r["error"]):
            return True
    groups = {}
    for r in table.rows:
        groups.setdefault((r["variable"], r["norm"], r["t"]), []).append(r["error"])
    return any(max(errs) > DIVERGENCE_FACTOR * max(errs[0], 1e-300) for errs in groups.values() if errs[0] > 0)


def run_stability(cfg, M=None):
    """Fixed mesh, tau = k h for each k; divergence is reported, not raised."""
    case = cfg.manufactured_case()
    _gate(case)
    M = M if M is not None else cfg.M[-1]
    table = ConvergenceTable(metadata=dict(experiment="stability", dim=cfg.dim, degree=cfg.degree, M=M, taus={}))
    for k in cfg.k:
        tau0 = requested_tau("kh", M, k)
        tau = adjust_tau(tau0, cfg.T, cfg.report_times)
        table.metadata["taus"][k] = (tau0, tau)
        try:
            result = run(_scheme_config(cfg, M, tau), case)
            records = result.records
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            log.warning("k=%g: run failed (%s); counted as divergence", k, exc)
            records = []
            for t in cfg.report_times:
                for var, norm, _ in NORMS:
                    table.add(var, norm, t, k, math.inf)
        for rec in records:
            for var, norm, attr in NORMS:
                table.add(var, norm, rec.t, k, getattr(rec, attr))
    table.metadata["diverged"] = _diverged_stability(table, cfg.k)
    return table


def _diverged_stability(table, ks):
    flagged = []
    base_k = min(ks)
    for r in table.rows:
        base = [b for b in table.select(r["variable"], r["norm"], r["t"]) if b["M_or_k"] == base_k]
        ref = base[0]["error"] if base else 0.0
        if not np.isfinite(r["error"]) or (ref > 0 and r["error"] > DIVERGENCE_FACTOR * ref):
            flagged.append((r["variable"], r["norm"], r["t"], r["M_or_k"]))
    return flagged


@dataclass
class SplitResult:
    temporal: ConvergenceTable
    spatial: ConvergenceTable
    temporal_slope: float
    temporal_slope_vs_exact: float
    spatial_slope: float


def run_split(cfg, temporal_M=128, temporal_N=(5, 10, 20, 40), reference_N=320, spatial_M=(8, 16, 32), spatial_N=512):
    """Error-splitting sweeps for u in L2 at the final time.

    Sweep A fixes a fine mesh and refines tau. Its temporal error is measured
    against a reference run with ``reference_N`` steps on the same mesh,
    which removes the common spatial error; the error against the exact
    solution is emitted as well. Sweep B fixes a small tau and refines h.
    """
    case = cfg.manufactured_case()
    _gate(case)
    T = cfg.T
    t_end = (T,)

    def one(M, N):
        sc = SchemeConfig(T=T, tau=T / N, M=M, dim=cfg.dim, degree=cfg.degree,
                          half_step_init=cfg.init, report_times=t_end, solver=cfg.solver())
        return run(sc, case)

    temporal = ConvergenceTable(metadata=dict(experiment="split-temporal", M=temporal_M, reference_N=reference_N))
    ref = one(temporal_M, reference_N)
    mass = assemble_mass(ref.dofmap)
    U_ref = ref.final.U_curr
    for N in temporal_N:
        res = one(temporal_M, N)
        diff = res.final.U_curr - U_ref
        temporal.add("u", "L2-temporal", T, N, float(np.sqrt(max(diff @ (mass @ diff), 0.0))))
        temporal.add("u", "L2", T, N, res.record_at(T).u_l2)
    _with_orders(temporal, list(temporal_N), lambda a, b: b / a)

    spatial = ConvergenceTable(metadata=dict(experiment="split-spatial", N=spatial_N))
    for M in spatial_M:
        res = one(M, spatial_N)
        spatial.add("u", "L2", T, M, res.record_at(T).u_l2)
    _with_orders(spatial, list(spatial_M), lambda a, b: b / a)

    def slope(table, norm):
        rows = table.select("u", norm, T)
        errs = [r["error"] for r in rows]
        if any(e <= 0 for e in errs):
            return math.nan
        return fit_order([1.0 / r["M_or_k"] for r in rows], errs)

    return SplitResult(
        temporal,
        spatial,
        slope(temporal, "L2-temporal"),
        slope(temporal, "L2"),
        slope(spatial, "L2"),
    )


def run_solve(cfg, path=None):
    """Single run at (M[-1], tau rule); returns CSV text of the final nodal values."""
    case = cfg.manufactured_case()
    _gate(case)
    M = cfg.M[-1]
    tau = adjust_tau(requested_tau(cfg.tau_rule, M, cfg.k[0]), cfg.T, ())
    sc = replace(_scheme_config(cfg, M, tau), report_times=())
    dofmap = DofMap(build_mesh(cfg.dim, M), cfg.degree)
    result = run(sc, case, dofmap=dofmap)
    U = result.final.U_curr
    Phi = result.Phi_final if result.Phi_final is not None else result.final.Phi0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    coords = ["x", "y", "z"][: cfg.dim]
    w.writerow(["dof", *coords, "U", "Phi"])
    for i in range(dofmap.n_dofs):
        w.writerow([i, *(f"{c:.17g}" for c in dofmap.coords[i]), f"{U[i]:.17g}", f"{Phi[i]:.17g}"])
    text = buf.getvalue()
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
