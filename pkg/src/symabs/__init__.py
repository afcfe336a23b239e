"""Robust symbolic abstractions of continuous-time uncertain nonlinear
systems via a control interface.

The toolkit verifies quadratic stability certificates for a concrete
plant paired with its lattice abstraction, evaluates the closed-form
discretization and disturbance bounds they induce, co-simulates the pair
under disturbances with hard admissibility monitoring, and synthesizes
recurrence plans on the lattice refined into concrete inputs.
"""

from .certificates import (
    Certificate,
    KLBound,
    admissible_input_map,
    check_matrix_inequality,
    check_multiplier,
    disturbance_bound,
    eta_bound,
    eta_satisfies_precision,
    falsify_cgps_lyapunov,
    interface_error_margin,
    kl_envelope,
)
from .geometry import Box
from .hierarchy import (
    AffineInterface,
    PairedRun,
    TrialBudget,
    check_closeness,
    check_robust_simulation,
    cosimulate,
    pair_initial,
    run_disturbance_study,
)
from .lattice import LatticePoint, Quantizer
from .planner import (
    GridGraph,
    PlanResult,
    Workspace,
    build_grid,
    plan_recurrence,
    waypoints_to_input,
)
from .systems import (
    AbstractSystem,
    ConcreteSystem,
    ConstantSignal,
    FeedbackSignal,
    InputMap,
    IqcSystem,
    PiecewiseConstantSignal,
    Signal,
    Trajectory,
    sample_disturbance,
    simulate_abstract,
    simulate_concrete,
    sup_norm,
    zero_signal,
)

__version__ = "0.1.0"

__all__ = [
    "AbstractSystem",
    "AffineInterface",
    "Box",
    "Certificate",
    "ConcreteSystem",
    "ConstantSignal",
    "FeedbackSignal",
    "GridGraph",
    "InputMap",
    "IqcSystem",
    "KLBound",
    "LatticePoint",
    "PairedRun",
    "PiecewiseConstantSignal",
    "PlanResult",
    "Quantizer",
    "Signal",
    "Trajectory",
    "TrialBudget",
    "Workspace",
    "admissible_input_map",
    "build_grid",
    "check_closeness",
    "check_matrix_inequality",
    "check_multiplier",
    "check_robust_simulation",
    "cosimulate",
    "disturbance_bound",
    "eta_bound",
    "eta_satisfies_precision",
    "falsify_cgps_lyapunov",
    "interface_error_margin",
    "kl_envelope",
    "pair_initial",
    "plan_recurrence",
    "run_disturbance_study",
    "sample_disturbance",
    "simulate_abstract",
    "simulate_concrete",
    "sup_norm",
    "waypoints_to_input",
    "zero_signal",
]
