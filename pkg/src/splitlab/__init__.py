"""splitlab: operator-splitting error laboratory for 1D stiff
reaction-diffusion problems.

Lie and Strang splitting of du/dt = D u_xx + k f(u) into diffusion and
pointwise-reaction sub-flows, a coupled quasi-exact reference solver,
local/global error studies with log-log slope fitting, and closed-form
evaluation of the classical and alternative (non-asymptotic) local error
bounds on the KPP/Zeldovich traveling-wave problem.
"""

from .analysis import (BoundSet, ErrorStudyReport, StudyRow, evaluate_bounds,
                       fit_slope, global_error_study, leading_term_check,
                       lie_bracket_field, local_error_study,
                       wave_speed_estimate)
from .cli import ConfigError, StudyConfig, parse_config, run_cli
from .flows import (ConvergenceError, DiffusionCoefficient, FlowTolerances,
                    ReactionModel, coupled_flow, diffusion_flow, reaction_flow)
from .grid import (Grid, GridField, apply_laplacian, build_grid, field_norms,
                   gradient_max)
from .kpp import (DerivativeSupNorms, UnderResolvedFrontWarning,
                  WaveParameters, derivative_sup_norms, kpp_wave_profile,
                  zeldovich_model)
from .splitting import SchemeId, evolve, split_step

__version__ = "0.1.0"

__all__ = [
    "BoundSet", "ConfigError", "ConvergenceError", "DerivativeSupNorms",
    "DiffusionCoefficient", "ErrorStudyReport", "FlowTolerances", "Grid",
    "GridField", "ReactionModel", "SchemeId", "StudyConfig", "StudyRow",
    "UnderResolvedFrontWarning", "WaveParameters", "apply_laplacian",
    "build_grid", "coupled_flow", "derivative_sup_norms", "diffusion_flow",
    "evaluate_bounds", "evolve", "field_norms", "fit_slope",
    "global_error_study", "gradient_max", "kpp_wave_profile",
    "leading_term_check", "lie_bracket_field", "local_error_study",
    "parse_config", "reaction_flow", "run_cli", "split_step",
    "wave_speed_estimate", "zeldovich_model",
]
