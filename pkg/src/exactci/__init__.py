"""Exact confidence intervals and level-alpha tests from p-value functions.

The package builds exact tests and confidence intervals for finite
discrete models by evaluating a p-value jointly as a function of the
observation and the hypothesized parameter (with nuisance-parameter
suprema taken exactly over their compatible domains), and it modifies any
given interval table, approximate, exact, or a bare point estimator, into
an exact one, iterating the modification to the smallest fixed point.
"""
from .engine import (
    FiniteModel,
    GridPolicy,
    HFunctionSpec,
    acceptance_region,
    h_at,
    h_profile,
    invert_all,
    invert_interval,
    sup_over_nuisance,
    worst_case_size,
)
from .errors import ExactCIError, GridResolutionWarning, InputError
from .limits import LimitsTable, read_limits, round_down, round_up, write_limits
from .proportion import CoverageReport, PropDesign
from .refine import (
    RefinementTrace,
    modify,
    modify_lower_one_sided,
    modify_upper_one_sided,
    refine_fixed_point,
    t2_spec,
    t2_stat,
)
from .twoprop import DiffDesign
from .matched import MPairDesign

__version__ = "0.1.0"

__all__ = [
    "ExactCIError",
    "InputError",
    "GridResolutionWarning",
    "GridPolicy",
    "FiniteModel",
    "HFunctionSpec",
    "LimitsTable",
    "CoverageReport",
    "RefinementTrace",
    "PropDesign",
    "DiffDesign",
    "MPairDesign",
    "h_profile",
    "h_at",
    "sup_over_nuisance",
    "invert_interval",
    "invert_all",
    "acceptance_region",
    "worst_case_size",
    "modify",
    "refine_fixed_point",
    "modify_lower_one_sided",
    "modify_upper_one_sided",
    "t2_stat",
    "t2_spec",
    "read_limits",
    "write_limits",
    "round_down",
    "round_up",
    "__version__",
]
