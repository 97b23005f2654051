"""Optimal vaccination of an SIR epidemic under an ICU capacity constraint."""
from .control import (
    BangBangPolicy,
    OptimizationResult,
    evaluate_policy,
    feedback_control,
    optimize_switching_time,
    simulate_feedback,
)
from .dynamics import (
    REFERENCE_X0,
    ControlSchedule,
    EpidemicParams,
    EpidemicState,
    SolverConfig,
    Trajectory,
    conserved_quantity,
    conserved_residuals,
    herd_time_bound,
    reference_params,
    running_cost,
    simulate,
    state_at,
)
from .errors import *  # noqa: F401,F403
from .experiments import (
    ScenarioSpec,
    SweepRow,
    coincidence_threshold,
    run_reference_scenarios,
    sweep_horizon,
    sweep_lambda,
)
from .pontryagin import (
    AdjointTrajectory,
    VerificationReport,
    estimate_atom,
    hamiltonian,
    solve_adjoint,
    switching_function,
    verify_candidate,
)
from .viability import (
    RegionLabel,
    SwitchingPoint,
    classify,
    gamma_bar,
    gamma_star,
    lambert_w,
    reach_time_A,
    switching_point,
)

__version__ = "0.1.0"
