"""Equilibria of two-player continuous games under model-class restrictions.

Core objects: convex action sets with exact projections, game specs with
gradient oracles, equilibrium solvers for stationary / Stackelberg / Nash
regimes, successive elimination across candidate model classes, and the
constructive restriction certificate showing that shrinking the learner's
class can strictly improve its equilibrium loss.
"""

__version__ = "0.1.0"

from .core import (
    ActionSet,
    Box,
    ConvergenceError,
    GameSpec,
    Halfspace,
    Intersection,
    JointAction,
    ModelClassLadder,
    Product,
    UnboundedSetError,
    box_1d,
    gradient_operator,
    monotonicity_audit,
    noisy_gradient_operator,
)
from .equilibrium import (
    EquilibriumReport,
    PsgdTrace,
    RegimeInputs,
    best_response,
    nash_report,
    nash_residual,
    pareto_improvement_search,
    psgd_nash,
    scaling_curve,
    solve_nash,
    stackelberg_leader,
    stationary_optimum,
)
from .restriction import (
    HypothesisNotSatisfiedError,
    RestrictionCertificate,
    certify_restriction,
)
from .selection import (
    SelectionReport,
    confidence_radius,
    suboptimality_gaps,
    successive_elimination,
)

__all__ = [
    "ActionSet",
    "Box",
    "ConvergenceError",
    "EquilibriumReport",
    "GameSpec",
    "Halfspace",
    "HypothesisNotSatisfiedError",
    "Intersection",
    "JointAction",
    "ModelClassLadder",
    "Product",
    "PsgdTrace",
    "RegimeInputs",
    "RestrictionCertificate",
    "SelectionReport",
    "UnboundedSetError",
    "best_response",
    "box_1d",
    "certify_restriction",
    "confidence_radius",
    "gradient_operator",
    "monotonicity_audit",
    "nash_report",
    "nash_residual",
    "noisy_gradient_operator",
    "pareto_improvement_search",
    "psgd_nash",
    "scaling_curve",
    "solve_nash",
    "stackelberg_leader",
    "stationary_optimum",
    "suboptimality_gaps",
    "successive_elimination",
    "__version__",
]
