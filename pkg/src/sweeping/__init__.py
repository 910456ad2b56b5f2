"""Sweeping processes with history-dependent perturbations.

Catching-up integration over moving (and state-dependent) prox-regular
sets, Picard iteration for memory terms, a-priori bound certificates and a
library of scenarios with oracles.
"""
from .bounds import (
    BoundCheck,
    BoundsReport,
    cancellation_bound,
    certificate_thm41,
    certificate_thm51,
    classical_gronwall,
    enhanced_gronwall,
    verify_solution_bounds,
)
from .errors import (
    AmbiguousProjection,
    ConfigError,
    InvalidGain,
    InversionNonConvergence,
    KernelEvaluationFailure,
    NonConvergence,
    NormalGenerationFailure,
    OutOfRange,
    OutsideProxNeighborhood,
    SingularFactor,
    StepTooLarge,
    SweepingError,
)
from .geometry import (
    AffineBox,
    Ball,
    Box,
    HalfSpace,
    Hyperplane,
    MovingSetDescriptor,
    Polyhedron,
    Singleton,
    Sphere,
    StateDependentSetDescriptor,
    TwoBallUnion,
    set_from_dict,
    static,
)
from .history import (
    HistoryOperator,
    PerturbationSpec,
    TimeGrid,
    Trajectory,
    VolterraHistory,
    VolterraKernel,
    verify_history_constant,
    volterra_to_history,
)
from .solver import (
    ProblemSpec,
    SolveReport,
    SolverConfig,
    catching_up,
    convergence_study,
    solve,
    solve_history_sweeping,
    solve_state_dependent,
    solve_state_volterra,
    solve_volterra,
)

__version__ = "0.1.0"

__all__ = [
    "BoundCheck",
    "BoundsReport",
    "cancellation_bound",
    "certificate_thm41",
    "certificate_thm51",
    "classical_gronwall",
    "enhanced_gronwall",
    "verify_solution_bounds",
    "AmbiguousProjection",
    "ConfigError",
    "InvalidGain",
    "InversionNonConvergence",
    "KernelEvaluationFailure",
    "NonConvergence",
    "NormalGenerationFailure",
    "OutOfRange",
    "OutsideProxNeighborhood",
    "SingularFactor",
    "StepTooLarge",
    "SweepingError",
    "AffineBox",
    "Ball",
    "Box",
    "HalfSpace",
    "Hyperplane",
    "MovingSetDescriptor",
    "Polyhedron",
    "Singleton",
    "Sphere",
    "StateDependentSetDescriptor",
    "TwoBallUnion",
    "set_from_dict",
    "static",
    "HistoryOperator",
    "PerturbationSpec",
    "TimeGrid",
    "Trajectory",
    "VolterraHistory",
    "VolterraKernel",
    "verify_history_constant",
    "volterra_to_history",
    "ProblemSpec",
    "SolveReport",
    "SolverConfig",
    "catching_up",
    "convergence_study",
    "solve",
    "solve_history_sweeping",
    "solve_state_dependent",
    "solve_state_volterra",
    "solve_volterra",
]
