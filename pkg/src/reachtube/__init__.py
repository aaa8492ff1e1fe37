"""Backward reachable tubes by Radau collocation on a log-stretched horizon,
applied to helicopter autorotation safety (height-velocity diagrams)."""

from .collocation import (
    CollocationGrid,
    differentiation_matrix,
    interpolate_trajectory,
    lgr_nodes_weights,
    time_forward,
    time_inverse,
    time_rate,
)
from .dynamics import (
    DynamicsModel,
    HeliControl,
    HeliState,
    HelicopterParams,
    TrimSolution,
    augment,
    autorotation_policy,
    heli_vector_field,
    helicopter_model,
    lander_is_safe,
    lander_model,
    lander_policy,
    lander_safe_bound,
    load_params,
    reference_params_path,
    solve_trim,
    trim_state,
)
from .nlp import (
    DerivativeEngine,
    NlpProblem,
    NlpSolution,
    SolverTolerances,
    check_derivatives,
    solve,
    transcribe,
)
from .reachability import (
    ReachProblem,
    ReachResult,
    SafetyClass,
    TerminalSurface,
    box_level_surface,
    classify,
    optimal_time,
    replay_verify,
    solve_value,
)

__version__ = "0.1.0"
