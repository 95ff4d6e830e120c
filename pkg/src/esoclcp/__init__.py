"""Stochastic linear complementarity solver on extended second order cones."""

from .cone import CompCase, ConeDims, ConePoint, classify_complementarity, in_L, in_M
from .merit import fb_grad, fb_psi, merit_grad, merit_jacobian, merit_theta, residual
from .problem import (
    DistributionSpec,
    PerturbEntry,
    ProblemParseError,
    ProblemSpec,
    ProblemValidationError,
    Realization,
    builtin_example,
    f_eval,
    load_problem,
    realize,
    serialize_problem,
)
from .reformulate import (
    JacobianBlocks,
    MixPoint,
    f1_eval,
    f2_eval,
    init_from_lcp,
    jacobian_blocks,
    recover_lcp_point,
)
from .risk import (
    SmoothingKind,
    cvar_empirical,
    plus_part,
    ru_pointwise,
    smooth_plus,
    smooth_plus_deriv,
    var_empirical,
)
from .saa import SAAPoint, SampleEvaluator, SampleSet, draw_samples, gradient, objective, theta_star
from .solver import (
    SolveReport,
    SolverConfig,
    StageResult,
    aloc,
    default_start,
    lm_direction,
    solve,
    stage_samples,
    stage_seed,
    wolfe_search,
)

__version__ = "0.1.0"

__all__ = [
    "CompCase",
    "ConeDims",
    "ConePoint",
    "classify_complementarity",
    "in_L",
    "in_M",
    "fb_grad",
    "fb_psi",
    "merit_grad",
    "merit_jacobian",
    "merit_theta",
    "residual",
    "DistributionSpec",
    "PerturbEntry",
    "ProblemParseError",
    "ProblemSpec",
    "ProblemValidationError",
    "Realization",
    "builtin_example",
    "f_eval",
    "load_problem",
    "realize",
    "serialize_problem",
    "JacobianBlocks",
    "MixPoint",
    "f1_eval",
    "f2_eval",
    "init_from_lcp",
    "jacobian_blocks",
    "recover_lcp_point",
    "SmoothingKind",
    "cvar_empirical",
    "plus_part",
    "ru_pointwise",
    "smooth_plus",
    "smooth_plus_deriv",
    "var_empirical",
    "SAAPoint",
    "SampleEvaluator",
    "SampleSet",
    "draw_samples",
    "gradient",
    "objective",
    "theta_star",
    "SolveReport",
    "SolverConfig",
    "StageResult",
    "aloc",
    "default_start",
    "lm_direction",
    "solve",
    "stage_samples",
    "stage_seed",
    "wolfe_search",
]
