"""Constant-curvature convex graphs over the ideal boundary of hyperbolic space.

The package solves the Dirichlet problem G(D^2 u, Du, u) = sigma for the
hyperbolic curvature of a graph over a star-shaped planar (or interval)
domain, drives the boundary value down an epsilon ladder toward the
asymptotic problem, verifies the curvature estimates and maximum
principles satisfied by converged solutions, and transports solutions to
their spacelike duals in the de Sitter half-space model.
"""

from .domain import Domain, DomainError, GridFunction, GridTopology, build_grid
from .curvature import (
    Blend,
    CurvatureError,
    DualOf,
    PowerMean,
    Quotient,
    dual_curvature,
    matrix_value_and_derivative,
    parse_curvature,
    structure_check,
)
from .solver import (
    ContinuationSchedule,
    ConvexityLoss,
    NoProgress,
    ScheduleExhausted,
    SingularJacobian,
    SolveReport,
    continuation_solve,
    default_schedule,
    linearize,
    newton_solve,
    residual,
)
from .caps import EquidistantCap
from .desitter import DeSitterCloud, dual_boundary_check, dual_curvatures, forward_map
from .verifier import Scorecard, ScorecardEntry, ball_radii, run_scorecard

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "DomainError",
    "GridFunction",
    "GridTopology",
    "build_grid",
    "Blend",
    "CurvatureError",
    "DualOf",
    "PowerMean",
    "Quotient",
    "dual_curvature",
    "matrix_value_and_derivative",
    "parse_curvature",
    "structure_check",
    "ContinuationSchedule",
    "ConvexityLoss",
    "NoProgress",
    "ScheduleExhausted",
    "SingularJacobian",
    "SolveReport",
    "continuation_solve",
    "default_schedule",
    "linearize",
    "newton_solve",
    "residual",
    "EquidistantCap",
    "DeSitterCloud",
    "dual_boundary_check",
    "dual_curvatures",
    "forward_map",
    "Scorecard",
    "ScorecardEntry",
    "ball_radii",
    "run_scorecard",
    "__version__",
]
