"""Uncoupled, linearized Crank-Nicolson Galerkin FEM for the thermistor equations."""

from .fem import DofMap, apply_dirichlet, assemble_load, assemble_mass, assemble_stiffness, interpolate
from .linalg import CsrMatrix, SolverConfig, solve_spd, spmv
from .mesh import Mesh, build_mesh, build_mesh_2d, build_mesh_3d, mesh_size
from .mms import case_2d, case_3d, error_norms, estimate_order, fit_order
from .scheme import SchemeConfig, ThermistorScheme, extrapolate_half, run

__version__ = "0.1.0"
