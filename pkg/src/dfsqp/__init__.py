"""Derivative-free solver for constrained nonlinear programs.

Augmented-Lagrangian outer loop with linearized equality constraints,
sequential-QP inner loop on a BFGS model, affine-scaling interior-point
subsolvers, and adaptive finite-difference step sizes for noise robustness.
"""
from .alm import (
    SolveResult,
    SolverOptions,
    TraceRecord,
    solve,
)
from .problem import (
    NoiseModel,
    ProblemSpec,
    StandardForm,
    apply_noise,
    default_ineq_guess,
    infeasibility,
    to_standard_form,
)

__version__ = "0.1.0"

__all__ = [
    "ProblemSpec",
    "StandardForm",
    "NoiseModel",
    "SolverOptions",
    "SolveResult",
    "TraceRecord",
    "solve",
    "apply_noise",
    "default_ineq_guess",
    "infeasibility",
    "to_standard_form",
    "__version__",
]
