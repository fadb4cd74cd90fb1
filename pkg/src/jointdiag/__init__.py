"""Joint diagonalization of complex matrix ensembles by descent methods with
closed-form gradient and Hessian information."""

from .cmat import DimensionMismatch, NoConvergence, SingularMatrix, real_inner
from .ensemble_gen import GroundTruth, generate
from .metrics import eigenvalue_error, median_log10_objective
from .objective import (
    MatrixEnsemble,
    TransformedEnsemble,
    f_at,
    gradient,
    hessian_apply,
    hessian_bilinear,
    objective_value,
)
from .solvers import (
    Algorithm,
    Init,
    JDResult,
    SolverConfig,
    Termination,
    UpdateMode,
    solve,
    solve_cg,
    solve_gd,
    solve_qn,
)
from .stepsize import Branch, StepSizeDecision, choose_step

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "Branch",
    "DimensionMismatch",
    "GroundTruth",
    "Init",
    "JDResult",
    "MatrixEnsemble",
    "NoConvergence",
    "SingularMatrix",
    "SolverConfig",
    "StepSizeDecision",
    "Termination",
    "TransformedEnsemble",
    "UpdateMode",
    "choose_step",
    "eigenvalue_error",
    "f_at",
    "generate",
    "gradient",
    "hessian_apply",
    "hessian_bilinear",
    "median_log10_objective",
    "objective_value",
    "real_inner",
    "solve",
    "solve_cg",
    "solve_gd",
    "solve_qn",
]
