"""Two-state vertical lander with a closed-form safe set.

Serves as the analytic oracle for the reachability pipeline: state (h, y)
with h' = -y, y' = g0 - u, u in [0, u_max], ground constraint h >= 0.  With
braking authority u_max > g0, a state can land within the touchdown-speed
bound y_max exactly when maximum braking gets it there before the ground.
"""

from __future__ import annotations

import math

import numpy as np

from .base import DynamicsModel

__all__ = ["lander_model", "lander_safe_bound", "lander_is_safe", "lander_policy"]


def lander_model(g0, u_max, y_max) -> DynamicsModel:
    """Build the lander DynamicsModel; requires u_max > g0 > 0."""
    if g0 <= 0.0:
        raise ValueError("g0 must be positive")
    if u_max <= g0:
        raise ValueError(f"u_max={u_max} gives no braking authority over g0={g0}")
    if y_max <= 0.0:
        raise ValueError("y_max must be positive")

    def vf(x, u):
        h, y = x
        return [-1.0 * y, g0 - u[0]]

    return DynamicsModel(
        state_dim=2,
        control_dim=1,
        vector_field=vf,
        control_lower=np.array([0.0]),
        control_upper=np.array([float(u_max)]),
        state_lower=np.array([0.0, -np.inf]),
        name="lander",
    )


def lander_safe_bound(h, g0, u_max, y_max):
    """Largest safe descent rate at altitude h under maximum braking."""
    return math.sqrt(y_max**2 + 2.0 * (u_max - g0) * max(h, 0.0))


def lander_is_safe(h, y, g0, u_max, y_max, climb_bound=None):
    """Closed-form membership in the landable set.

    ``climb_bound`` restricts how fast a climbing (y < 0) state may move away
    from the ground before it is excluded; physically every climbing state
    falls back and is safe, the bound just keeps numerical comparisons inside
    the domain where short trajectories exist.  Default: -y_max.
    """
    if climb_bound is None:
        climb_bound = -y_max
    if h < 0.0:
        return False
    if y < climb_bound:
        return False
    return y <= lander_safe_bound(h, g0, u_max, y_max)


def lander_policy(g0, u_max, y_max, touchdown_frac=0.8, ride_frac=0.85):
    """Braking-curve guidance: brake hard above the descent reference.

    The reference blends to ``touchdown_frac * y_max`` at the ground so the
    approach arrives inside the touchdown-speed bound with margin.
    """
    a_br = u_max - g0

    def policy(x):
        h, y = max(x[0], 0.0), x[1]
        y_ref = math.sqrt((touchdown_frac * y_max) ** 2 + 2.0 * 0.81 * a_br * h)
        if y > y_ref:
            return np.array([u_max])
        if y > ride_frac * y_ref:
            return np.array([g0])
        return np.array([0.8 * g0])

    return policy
