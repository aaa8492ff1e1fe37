"""Point-mass helicopter model in the vertical plane with rotor-speed dynamics.

State (English engineering units): vertical velocity y (ft/s, positive down),
horizontal velocity v (ft/s), rotor speed omega (rad/s), height h (ft),
horizontal displacement z (ft), engine power P (ft*lb/s).  Controls: thrust
coefficient c_t and pitch angle theta (rad).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import scalars
from ..units import deg_to_rad
from .base import DynamicsModel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
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
]


class NoTrimError(RuntimeError):
    """Trim iteration did not converge."""


class InfeasibleTrimError(RuntimeError):
    """Trim exists only beyond the blade-stall thrust bound."""


@dataclass(frozen=True)
class HelicopterParams:
    m_mass: float        # slug
    R_rotor: float       # ft
    I_R: float           # slug*ft^2
    rho: float           # slug/ft^3
    g_grav: float        # ft/s^2
    f_eh: float          # ft^2, vertical flat-plate drag area
    f_ez: float          # ft^2, horizontal flat-plate drag area
    sigma_R: float       # rotor solidity
    c_d: float           # blade drag coefficient
    eta: float           # rotor power efficiency, in (0, 1]
    kappa: float         # s, engine response time constant
    omega_nominal: float # rad/s
    ct_stall_factor: float = 0.15
    theta_max: float = field(default=deg_to_rad(40.0))

    def __post_init__(self):
        positive = (
            "m_mass", "R_rotor", "I_R", "rho", "g_grav", "f_eh", "f_ez",
            "sigma_R", "c_d", "eta", "kappa", "omega_nominal", "ct_stall_factor",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"parameter {name} must be strictly positive")
        if self.eta > 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not (0.0 < self.theta_max < math.pi / 2):
            raise ValueError("theta_max must lie in (0, pi/2)")

    @property
    def ct_max(self):
        """Blade-stall thrust bound: c_t <= ct_stall_factor * sigma_R."""
        return self.ct_stall_factor * self.sigma_R

    @property
    def disk_area(self):
        return math.pi * self.R_rotor**2

    def hover_ct(self, omega=None):
        """Thrust coefficient balancing weight at zero speeds and pitch."""
        om = self.omega_nominal if omega is None else omega
        return self.m_mass * self.g_grav / (self.rho * self.disk_area * (om * self.R_rotor) ** 2)


@dataclass(frozen=True)
class HeliState:
    y: float      # ft/s, vertical velocity, positive down
    v: float      # ft/s, horizontal velocity
    omega: float  # rad/s
    h: float      # ft above ground
    z: float      # ft, horizontal displacement
    P: float      # ft*lb/s, engine power

    def as_array(self):
        return np.array([self.y, self.v, self.omega, self.h, self.z, self.P])

    @classmethod
    def from_array(cls, x):
        y, v, omega, h, z, P = (float(c) for c in x)
        return cls(y, v, omega, h, z, P)


@dataclass(frozen=True)
class HeliControl:
    c_t: float
    theta: float

    def as_array(self):
        return np.array([self.c_t, self.theta])


@dataclass(frozen=True)
class TrimSolution:
    c_t: float
    theta: float
    omega: float
    p_trim: float
    residual: float


def _field_components(p: HelicopterParams, x, u):
    """Vector field over generic scalar components (floats, arrays, duals)."""
    y, v, omega, h, z, P = x
    c_t, theta = u
    disk = p.disk_area
    tip = omega * p.R_rotor
    V_f = scalars.sqrt(y * y + v * v)
    nu = tip * scalars.sqrt(0.5 * c_t)
    lam = (v * scalars.sin(theta) - y * scalars.cos(theta) + nu) / tip
    c_p = 0.125 * p.sigma_R * p.c_d + c_t * lam
    thrust_acc = (p.rho / p.m_mass) * disk * tip * tip * c_t
    y_dot = p.g_grav - thrust_acc * scalars.cos(theta) + 0.5 * (p.rho / p.m_mass) * p.f_eh * V_f * y
    v_dot = thrust_acc * scalars.sin(theta) - 0.5 * (p.rho / p.m_mass) * p.f_ez * V_f * v
    omega_dot = (P - (1.0 / p.eta) * p.rho * disk * (tip * tip * tip) * c_p) / (p.I_R * omega)
    h_dot = -1.0 * y
    z_dot = 1.0 * v
    p_dot = -1.0 * P / p.kappa
    return [y_dot, v_dot, omega_dot, h_dot, z_dot, p_dot]


def heli_vector_field(params: HelicopterParams, x, u):
    """State derivative (y', v', omega', h', z', P') at one state/control.

    Accepts HeliState/HeliControl or plain sequences.  omega must be positive
    (it divides the rotor-speed equation) and c_t nonnegative (it sits under
    the induced-velocity square root).
    """
    xv = x.as_array() if isinstance(x, HeliState) else np.asarray(x, dtype=float)
    uv = u.as_array() if isinstance(u, HeliControl) else np.asarray(u, dtype=float)
    if xv[2] <= 0.0:
        raise ValueError(f"rotor speed must be positive, got {xv[2]}")
    if uv[0] < 0.0:
        raise ValueError(f"thrust coefficient must be nonnegative, got {uv[0]}")
    out = _field_components(params, list(xv), list(uv))
    return np.array([float(c) for c in out])


def advance_velocity(x, u):
    """In-plane blade advance velocity v*cos(theta) + y*sin(theta).

    Defined by the model but consumed by no equation here; kept as a
    documented helper.
    """
    xv = x.as_array() if isinstance(x, HeliState) else np.asarray(x, dtype=float)
    uv = u.as_array() if isinstance(u, HeliControl) else np.asarray(u, dtype=float)
    return float(xv[1] * math.cos(uv[1]) + xv[0] * math.sin(uv[1]))


def helicopter_model(params: HelicopterParams, omega_min=None) -> DynamicsModel:
    """DynamicsModel wrapper used by the reachability pipeline.

    ``omega_min`` guards the 1/omega singularity as a state box bound
    (default: 10% of nominal rotor speed).  This is a numerical guard, not a
    physical limit of the model.
    """
    if omega_min is None:
        omega_min = 0.1 * params.omega_nominal
    state_lower = np.array([-np.inf, -np.inf, float(omega_min), 0.0, -np.inf, -np.inf])

    def vf(x, u):
        return _field_components(params, x, u)

    return DynamicsModel(
        state_dim=6,
        control_dim=2,
        vector_field=vf,
        control_lower=np.array([0.0, -params.theta_max]),
        control_upper=np.array([params.ct_max, params.theta_max]),
        state_lower=state_lower,
        name="helicopter",
    )


def solve_trim(params: HelicopterParams, v_forward, max_iter=50, tol=1e-10) -> TrimSolution:
    """Level-flight trim at forward speed ``v_forward`` (ft/s).

    Holds omega at nominal and Newton-solves y' = 0, v' = 0 for (c_t, theta);
    p_trim is the engine power that would keep omega' = 0 at that condition.
    """
    omega = params.omega_nominal
    v = float(v_forward)

    def residual(q):
        d = heli_vector_field(
            params, np.array([0.0, v, omega, 0.0, 0.0, 0.0]), np.array([max(q[0], 0.0), q[1]])
        )
        return np.array([d[0], d[1]])

    q = np.array([params.hover_ct(), 0.0])
    r = residual(q)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        # numerical 2x2 Jacobian; the system is smooth and well scaled
        J = np.empty((2, 2))
        for k in range(2):
            step = 1e-7 * (1.0 + abs(q[k]))
            qp = q.copy(); qp[k] += step
            qm = q.copy(); qm[k] -= step
            J[:, k] = (residual(qp) - residual(qm)) / (2.0 * step)
        try:
            dq = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NoTrimError(f"singular trim Jacobian at v={v:.2f} ft/s") from exc
        q = q + dq
        r = residual(q)
    res = float(np.max(np.abs(r)))
    if res > 1e-8:
        raise NoTrimError(f"trim iteration did not converge at v={v:.2f} ft/s (residual {res:.2e})")
    c_t, theta = float(q[0]), float(q[1])
    if c_t > params.ct_max:
        raise InfeasibleTrimError(
            f"trim thrust c_t={c_t:.5f} exceeds stall bound {params.ct_max:.5f} at v={v:.2f} ft/s"
        )
    if abs(theta) > params.theta_max:
        raise InfeasibleTrimError(
            f"trim pitch {math.degrees(theta):.1f} deg exceeds limit at v={v:.2f} ft/s"
        )
    # engine power balancing the rotor torque at the trim condition
    tip = omega * params.R_rotor
    nu = tip * math.sqrt(0.5 * c_t)
    lam = (v * math.sin(theta) + nu) / tip
    c_p = 0.125 * params.sigma_R * params.c_d + c_t * lam
    p_trim = (1.0 / params.eta) * params.rho * params.disk_area * tip**3 * c_p
    return TrimSolution(c_t=c_t, theta=theta, omega=omega, p_trim=p_trim, residual=res)


def trim_state(params: HelicopterParams, v_forward, height, power=0.0) -> HeliState:
    """Trimmed-flight initial state at the given speed (ft/s) and height."""
    solve_trim(params, v_forward)  # raises if no trim exists
    return HeliState(y=0.0, v=float(v_forward), omega=params.omega_nominal,
                     h=float(height), z=0.0, P=float(power))


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = (
    "m_mass", "R_rotor", "I_R", "rho", "g_grav", "f_eh", "f_ez",
    "sigma_R", "c_d", "eta", "kappa", "omega_nominal",
)
_OPTIONAL_KEYS = ("ct_stall_factor", "theta_max", "theta_max_deg")


def load_params(path) -> HelicopterParams:
    """Read HelicopterParams from a TOML file.

    Keys match the dataclass field names; ``theta_max_deg`` may be given
    instead of ``theta_max`` (radians) and is converted at parse time.
    Unknown keys are an error so typos in physical constants cannot pass
    silently.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    unknown = sorted(set(raw) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
    if unknown:
        raise ValueError(f"unknown parameter key(s) in {path.name}: {', '.join(unknown)}")
    missing = sorted(set(_REQUIRED_KEYS) - set(raw))
    if missing:
        raise ValueError(f"missing parameter key(s) in {path.name}: {', '.join(missing)}")
    if "theta_max" in raw and "theta_max_deg" in raw:
        raise ValueError(f"{path.name}: give theta_max or theta_max_deg, not both")
    kwargs = {}
    for key, value in raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValueError(f"{path.name}: value for {key} must be numeric, got {value!r}")
        if key == "theta_max_deg":
            kwargs["theta_max"] = deg_to_rad(float(value))
        else:
            kwargs[key] = float(value)
    return HelicopterParams(**kwargs)


def reference_params_path() -> Path:
    """Path of the bundled representative OH-58A-class parameter file."""
    return Path(__file__).resolve().parent.parent / "data" / "oh58a.toml"


# ---------------------------------------------------------------------------
# autorotation guidance (initial-guess policies for the reachability solver)
# ---------------------------------------------------------------------------

def autorotation_policy(params: HelicopterParams, descent_cap=130.0, touchdown_rate=5.5,
                        brake_accel=24.0, track_gain=3.5, pitch_gain=0.05,
                        brake_margin=0.9):
    """Feedback law flying a descend-and-flare autorotation profile.

    Tracks a braking-curve descent-rate reference (capped at ``descent_cap``)
    by thrust inversion, and bleeds forward speed with nose-up pitch once the
    remaining altitude matches the speed-bleed distance.  Used to seed and
    certify reachability solves, not as a product autopilot.
    """
    rho, m, R = params.rho, params.m_mass, params.R_rotor
    disk = params.disk_area

    def policy(x):
        y, v, omega, h = x[0], x[1], x[2], max(x[3], 0.0)
        y_ref = min(math.sqrt(touchdown_rate**2 + 2.0 * brake_accel * h), descent_cap)
        if h < max(60.0, brake_margin * v * v / 36.0):
            theta = -min(0.85 * params.theta_max, pitch_gain * v)
        else:
            theta = deg_to_rad(2.0)
        feedforward = brake_accel * min(y / y_ref, 1.2) if (y > 0.0 and y_ref < descent_cap) else 0.0
        accel_cmd = params.g_grav + feedforward + track_gain * (y - y_ref)
        thrust_cmd = m * max(accel_cmd, 0.0) / max(math.cos(theta), 0.5)
        c_t = thrust_cmd / (rho * disk * (omega * R) ** 2)
        return np.array([min(max(c_t, 0.0), 0.92 * params.ct_max), theta])

    return policy
