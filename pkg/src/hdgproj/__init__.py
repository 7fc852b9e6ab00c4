"""Hybridizable DG solver for the 2D Poisson problem with projected facet fluxes."""

from .analysis import ErrorReport, error_q_l2, error_report, error_u_l2, jump_norm, observed_order
from .hdg import DiscretizationConfig, MethodVariant, Solution, solve, solve_monolithic
from .mesh import Mesh, MeshError, build_connectivity, generate_structured, read_mesh, write_mesh
from .problems import get_problem
from .study import StudyConfig, compare_methods, emit_study, emit_table, run_study

__all__ = [
    "DiscretizationConfig", "ErrorReport", "Mesh", "MeshError", "MethodVariant", "Solution",
    "StudyConfig", "build_connectivity", "compare_methods", "emit_study", "emit_table",
    "error_q_l2", "error_report", "error_u_l2", "generate_structured", "get_problem",
    "jump_norm", "observed_order", "read_mesh", "run_study", "solve", "solve_monolithic",
    "write_mesh",
]
__version__ = "0.1.0"
