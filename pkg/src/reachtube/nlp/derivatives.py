"""Forward-mode exact derivatives via dual numbers, with a finite-difference
verification oracle.

A ``Dual`` carries a batch of values (shape ``B``) and directional
derivatives (shape ``(B, ndir)``); arithmetic broadcasts over the batch so
one pass through a vector field differentiates it at every grid node at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dual", "seed_duals", "DerivativeEngine", "fd_gradient", "fd_jacobian", "check_derivatives"]


class Dual:
    __slots__ = ("val", "der")
    __array_priority__ = 100.0

    def __init__(self, val, der):
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)

    def _lift(self, other):
        if isinstance(other, Dual):
            return other
        val = np.broadcast_to(np.asarray(other, dtype=float), self.val.shape)
        return Dual(val, np.zeros(self.der.shape))

    def __add__(self, o):
        o = self._lift(o)
        return Dual(self.val + o.val, self.der + o.der)

    __radd__ = __add__

    def __sub__(self, o):
        o = self._lift(o)
        return Dual(self.val - o.val, self.der - o.der)

    def __rsub__(self, o):
        o = self._lift(o)
        return Dual(o.val - self.val, o.der - self.der)

    def __mul__(self, o):
        o = self._lift(o)
        return Dual(self.val * o.val, self.der * o.val[..., None] + o.der * self.val[..., None])

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._lift(o)
        inv = 1.0 / o.val
        num = self.der * o.val[..., None] - o.der * self.val[..., None]
        return Dual(self.val * inv, num * (inv * inv)[..., None])

    def __rtruediv__(self, o):
        return self._lift(o).__truediv__(self)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pow__(self, k):
        return Dual(self.val**k, (k * self.val ** (k - 1))[..., None] * self.der)

    def __abs__(self):
        s = np.sign(self.val)
        return Dual(np.abs(self.val), s[..., None] * self.der)

    # named methods picked up by reachtube.scalars dispatch
    def sqrt(self):
        r = np.sqrt(np.maximum(self.val, 0.0))
        # derivative set to 0 at the root-point: correct for the products
        # (x*sqrt(x), sqrt(x^2 + y^2) * x, ...) these fields use
        g = np.where(r > 0.0, 0.5 / np.where(r > 0.0, r, 1.0), 0.0)
        return Dual(r, g[..., None] * self.der)

    def sin(self):
        return Dual(np.sin(self.val), np.cos(self.val)[..., None] * self.der)

    def cos(self):
        return Dual(np.cos(self.val), -np.sin(self.val)[..., None] * self.der)

    def exp(self):
        e = np.exp(self.val)
        return Dual(e, e[..., None] * self.der)

    def maximum(self, o):
        o = self._lift(o)
        pick = self.val >= o.val
        return Dual(np.where(pick, self.val, o.val), np.where(pick[..., None], self.der, o.der))

    def __repr__(self):
        return f"Dual(val={self.val!r})"


def seed_duals(values, directions):
    """Component duals for a batch: values (B, k), directions selects k seeds.

    Returns a list of k Duals whose derivative axes are the ``directions``
    unit vectors (length ndir).
    """
    values = np.asarray(values, dtype=float)
    B, k = values.shape
    ndir = directions
    out = []
    for j in range(k):
        der = np.zeros((B, ndir))
        der[:, j] = 1.0
        out.append(Dual(values[:, j], der))
    return out


def fd_gradient(fun, x, step=None):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * (1.0 + np.abs(x))
    else:
        step = np.full_like(x, step)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy(); xp[i] += step[i]
        xm = x.copy(); xm[i] -= step[i]
        g[i] = (fun(xp) - fun(xm)) / (2.0 * step[i])
    return g


def fd_jacobian(fun, x, step=None):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    if step is None:
        step = 1e-6 * (1.0 + np.abs(x))
    else:
        step = np.full_like(x, step)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        xp = x.copy(); xp[i] += step[i]
        xm = x.copy(); xm[i] -= step[i]
        J[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * step[i])
    return J


@dataclass(frozen=True)
class DerivativeEngine:
    """Selects how problem derivatives are produced.

    ``exact`` propagates dual numbers through the transcription; ``fd`` falls
    back to central differences (slow; retained as the verification oracle).
    """

    mode: str = "exact"
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("exact", "fd"):
            raise ValueError(f"unknown derivative mode {self.mode!r}")


def check_derivatives(problem, probe_point):
    """Worst relative disagreement between problem derivatives and central FD.

    Compares the objective gradient and the equality-constraint Jacobian at
    ``probe_point``; returns the maximum relative discrepancy.
    """
    v = np.asarray(probe_point, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("probe point must be finite")
    worst = 0.0

    g = problem.objective_gradient(v)
    g_fd = fd_gradient(problem.objective, v)
    scale = max(1.0, float(np.max(np.abs(g_fd))))
    worst = max(worst, float(np.max(np.abs(g - g_fd))) / scale)

    c0 = problem.equalities(v)
    if c0.size:
        J = problem.equality_jacobian(v)
        J_fd = fd_jacobian(problem.equalities, v)
        scale = max(1.0, float(np.max(np.abs(J_fd))))
        worst = max(worst, float(np.max(np.abs(J - J_fd))) / scale)
    return worst
