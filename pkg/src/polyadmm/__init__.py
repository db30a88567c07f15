"""ADMM for nonconvex composite problems ``min_{x in C} f(x) + g(Ax)`` with
polyhedral convex ``g``, plus the convex-analysis tools and convergence
diagnostics around it."""

from .admm import (AdmmConfig, AdmmState, IterateTrace, ProblemSpec, XSolverConfig,
                   detect_cycle, run, write_trace_csv)
from .convexset import Ball, Box, HPolyhedron, WholeSpace
from .diagnostics import DiagnosticsConfig, rate_estimate, residual_T
from .errors import (CapabilityError, InfeasibleError, PreconditionError, SolverError,
                     UsageError)
from .polyfunc import MaxAffineFunction, MoreauParams, prox
from .smoothfn import SmoothFunction
from .svs import check_assumption, compute_beta0

__all__ = [
    "AdmmConfig", "AdmmState", "IterateTrace", "ProblemSpec", "XSolverConfig", "detect_cycle",
    "run", "write_trace_csv", "Ball", "Box", "HPolyhedron", "WholeSpace", "DiagnosticsConfig",
    "rate_estimate", "residual_T", "CapabilityError", "InfeasibleError", "PreconditionError",
    "SolverError", "UsageError", "MaxAffineFunction", "MoreauParams", "prox", "SmoothFunction",
    "check_assumption", "compute_beta0",
]
