"""Right-hand-side multi-parametric MILP analysis for UCED capacity planning."""
from .case import CaseError, UcedCase, load_bundled, load_case, make_case, validate_case
from .standard_form import StandardForm, assemble_standard_form, parameter_rows, relax_binaries
from .lp import extract_active_set, solve_fixed
from .mplp import explore, value_gradient
from .bnb import solve_mpmilp
from .planner import allocate_budget, rank_lines

__version__ = "0.1.0"

__all__ = [
    "CaseError",
    "allocate_budget",
    "explore",
    "extract_active_set",
    "rank_lines",
    "solve_fixed",
    "solve_mpmilp",
    "value_gradient",
    "StandardForm",
    "UcedCase",
    "assemble_standard_form",
    "load_bundled",
    "load_case",
    "make_case",
    "parameter_rows",
    "relax_binaries",
    "validate_case",
]
