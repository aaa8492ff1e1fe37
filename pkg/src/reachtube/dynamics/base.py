"""Controlled-dynamics interface and the time-freezing augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = ["DynamicsModel", "augment"]


@dataclass(frozen=True)
class DynamicsModel:
    """A controlled ODE x' = f(x, u) with box-bounded controls.

    ``vector_field`` takes two sequences (state components, control
    components) and returns the sequence of state derivatives.  Components may
    be floats, equal-length numpy arrays (batched evaluation), or dual
    numbers; fields must therefore be written with ``reachtube.scalars``
    helpers instead of bare ``math`` calls.

    ``state_lower``/``state_upper`` are optional box bounds enforced on the
    trajectory by downstream solvers; ``None`` entries via ``-inf``/``inf``.
    """

    state_dim: int
    control_dim: int
    vector_field: Callable
    control_lower: np.ndarray
    control_upper: np.ndarray
    state_lower: Optional[np.ndarray] = None
    state_upper: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        lo = np.asarray(self.control_lower, dtype=float).reshape(self.control_dim)
        hi = np.asarray(self.control_upper, dtype=float).reshape(self.control_dim)
        if np.any(lo > hi):
            raise ValueError("control_lower exceeds control_upper")
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)
        for attr in ("state_lower", "state_upper"):
            v = getattr(self, attr)
            if v is not None:
                object.__setattr__(
                    self, attr, np.asarray(v, dtype=float).reshape(self.state_dim)
                )

    def __call__(self, x, u):
        """Evaluate the vector field at a single state/control pair."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = self.vector_field(list(x), list(u))
        return np.array([float(c) for c in out])

    def control_mid(self):
        lo, hi = self.control_lower, self.control_upper
        mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
        return mid

    def state_bounds(self):
        lo = self.state_lower if self.state_lower is not None else np.full(self.state_dim, -np.inf)
        hi = self.state_upper if self.state_upper is not None else np.full(self.state_dim, np.inf)
        return lo, hi


def augment(model: DynamicsModel) -> DynamicsModel:
    """Append the time-freezing control a in [0, 1] scaling the whole field.

    a = 1 reproduces the original dynamics, a = 0 stops them; intermediate
    values rescale time.  The new model has control dimension m + 1 with the
    freeze variable last.
    """
    base_field = model.vector_field
    m = model.control_dim

    def frozen_field(x, u):
        a = u[m]
        f = base_field(x, u[:m])
        return [a * fi for fi in f]

    return replace(
        model,
        control_dim=m + 1,
        vector_field=frozen_field,
        control_lower=np.append(model.control_lower, 0.0),
        control_upper=np.append(model.control_upper, 1.0),
        name=(model.name + "+freeze") if model.name else "freeze-augmented",
    )
