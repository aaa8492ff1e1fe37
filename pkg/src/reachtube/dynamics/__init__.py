from .base import DynamicsModel, augment
from .helicopter import (
    HelicopterParams,
    HeliState,
    HeliControl,
    TrimSolution,
    NoTrimError,
    InfeasibleTrimError,
    heli_vector_field,
    helicopter_model,
    solve_trim,
    trim_state,
    advance_velocity,
    load_params,
    reference_params_path,
    autorotation_policy,
)
from .lander import lander_model, lander_safe_bound, lander_is_safe, lander_policy

__all__ = [
    "DynamicsModel",
    "augment",
    "HelicopterParams",
    "HeliState",
    "HeliControl",
    "TrimSolution",
    "NoTrimError",
    "InfeasibleTrimError",
    "heli_vector_field",
    "helicopter_model",
    "solve_trim",
    "trim_state",
    "advance_velocity",
    "load_params",
    "reference_params_path",
    "autorotation_policy",
    "lander_model",
    "lander_safe_bound",
    "lander_is_safe",
    "lander_policy",
]
