"""Finite-dimensional transcription of the frozen-dynamics landing problem.

Variables are the stacked node states X = (x_1..x_N), node controls
U = (u_0..u_N), and freeze values A = (a_0..a_N).  Collocation enforces
D X_all = G at the N non-initial nodes, where G_j = a_j * c/(1-tau_j) *
f(x_j, u_j); the objective is the terminal cost applied to the quadrature
terminal estimate x0 + sum_j w_j G_j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..collocation import CollocationGrid, interpolation_matrix
from .derivatives import Dual, DerivativeEngine, fd_gradient, fd_jacobian, seed_duals

__all__ = ["VariableLayout", "NlpProblem", "transcribe"]


@dataclass(frozen=True)
class VariableLayout:
    """Named slices partitioning the decision vector into X, U, A blocks."""

    state_dim: int
    control_dim: int   # controls before freeze augmentation
    node_count: int    # N: collocated nodes; the grid has N+1 nodes

    @property
    def X(self):
        return slice(0, self.state_dim * self.node_count)

    @property
    def U(self):
        start = self.state_dim * self.node_count
        return slice(start, start + self.control_dim * (self.node_count + 1))

    @property
    def A(self):
        start = self.state_dim * self.node_count + self.control_dim * (self.node_count + 1)
        return slice(start, start + self.node_count + 1)

    @property
    def variable_count(self):
        return self.A.stop


class NlpProblem:
    """Smooth NLP with equalities, linear inequalities, and box bounds.

    min  objective(v)            (or max of objective terms, if terms given)
    s.t. equalities(v) = 0
         ineq_matrix @ v + ineq_offset <= 0
         box_lower <= v <= box_upper

    ``objective_terms`` (when set) lists smooth functions whose pointwise max
    is the objective; the solver exploits this to avoid minimizing a kink.
    """

    def __init__(self, variable_count, objective, box_lower=None, box_upper=None,
                 objective_gradient=None, equalities=None, equality_jacobian=None,
                 ineq_matrix=None, ineq_offset=None, variable_layout=None,
                 equality_row_scale=None):
        self.variable_count = int(variable_count)
        self._objective = objective
        self._objective_gradient = objective_gradient
        self._equalities = equalities
        self._equality_jacobian = equality_jacobian
        self.box_lower = (np.full(self.variable_count, -np.inf)
                          if box_lower is None else np.asarray(box_lower, dtype=float))
        self.box_upper = (np.full(self.variable_count, np.inf)
                          if box_upper is None else np.asarray(box_upper, dtype=float))
        if self.box_lower.size != self.variable_count or self.box_upper.size != self.variable_count:
            raise ValueError("box bounds do not match variable_count")
        if ineq_matrix is None:
            ineq_matrix = sp.csr_matrix((0, self.variable_count))
        self.ineq_matrix = sp.csr_matrix(ineq_matrix)
        self.ineq_offset = (np.zeros(self.ineq_matrix.shape[0])
                            if ineq_offset is None else np.asarray(ineq_offset, dtype=float))
        self.variable_layout = variable_layout
        self.equality_row_scale = equality_row_scale

    # -- objective -----------------------------------------------------
    def objective(self, v):
        return float(self._objective(v))

    def objective_gradient(self, v):
        if self._objective_gradient is not None:
            return np.asarray(self._objective_gradient(v), dtype=float)
        return fd_gradient(self._objective, v)

    def objective_terms(self, v):
        """Smooth max-decomposition of the objective, or None."""
        return None

    def objective_terms_jacobian(self, v):
        raise NotImplementedError

    # -- constraints ----------------------------------------------------
    def equalities(self, v):
        if self._equalities is None:
            return np.zeros(0)
        return np.asarray(self._equalities(v), dtype=float)

    def equality_jacobian(self, v):
        if self._equalities is None:
            return np.zeros((0, self.variable_count))
        if self._equality_jacobian is not None:
            return np.asarray(self._equality_jacobian(v), dtype=float)
        return fd_jacobian(self._equalities, v)

    def equality_jtprod(self, v, y):
        J = self.equality_jacobian(v)
        return J.T @ np.asarray(y, dtype=float)

    @property
    def equality_count(self):
        return None  # unknown until evaluated

    @property
    def linear_inequalities(self):
        return self.ineq_matrix


class TranscribedProblem(NlpProblem):
    """Collocation transcription with structured exact derivatives."""

    def __init__(self, model, grid: CollocationGrid, terminal_cost, x0,
                 engine: DerivativeEngine = DerivativeEngine(),
                 monotone_freeze=True, freeze_tail=1, path_lower_midpoints=True):
        if model.control_dim < 2:
            raise ValueError("transcribe expects a freeze-augmented model (control_dim >= 2)")
        n = model.state_dim
        m = model.control_dim - 1  # freeze variable is carried in the A block
        N = grid.node_count
        K = N + 1
        x0 = np.asarray(x0, dtype=float).reshape(n)
        layout = VariableLayout(state_dim=n, control_dim=m, node_count=N)
        nv = layout.variable_count

        lb = np.full(nv, -np.inf)
        ub = np.full(nv, np.inf)
        lb[layout.U] = np.tile(model.control_lower[:m], K)
        ub[layout.U] = np.tile(model.control_upper[:m], K)
        lb[layout.A] = model.control_lower[m]
        ub[layout.A] = model.control_upper[m]
        if freeze_tail:
            # the landing must complete inside the resolved horizon: without
            # this pin the tail nodes (huge c/(1-tau)) carry unphysical
            # derivative content that games the terminal quadrature
            ub[layout.A.stop - int(freeze_tail):layout.A.stop] = model.control_lower[m]
        x_lo, x_hi = model.state_bounds()
        for s in range(n):
            if np.isfinite(x_lo[s]):
                lb[layout.X.start + s:layout.X.stop:n] = x_lo[s]
            if np.isfinite(x_hi[s]):
                ub[layout.X.start + s:layout.X.stop:n] = x_hi[s]

        rows = []
        offsets = []
        if monotone_freeze:
            mono = sp.lil_matrix((N, nv))
            for j in range(1, K):
                mono[j - 1, layout.A.start + j] = 1.0
                mono[j - 1, layout.A.start + j - 1] = -1.0
            rows.append(mono.tocsr())
            offsets.append(np.zeros(N))
        self.monotone_row_count = N if monotone_freeze else 0
        if path_lower_midpoints:
            # hold bounded states above their lower bound between nodes too:
            # the interpolated state is linear in X, so these are linear rows
            mids = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
            M = interpolation_matrix(grid.nodes, mids)
            for s in range(n):
                if not np.isfinite(x_lo[s]):
                    continue
                r = sp.lil_matrix((mids.size, nv))
                off = np.empty(mids.size)
                for i in range(mids.size):
                    off[i] = x_lo[s] - M[i, 0] * x0[s]
                    for j in range(1, K):
                        r[i, layout.X.start + (j - 1) * n + s] = -M[i, j]
                rows.append(r.tocsr())
                offsets.append(off)
        ineq = sp.vstack(rows).tocsr() if rows else None
        ineq_off = np.concatenate(offsets) if offsets else None

        super().__init__(
            variable_count=nv,
            objective=self._objective_value,
            box_lower=lb,
            box_upper=ub,
            ineq_matrix=ineq,
            ineq_offset=ineq_off,
            variable_layout=layout,
            equality_row_scale=np.repeat(1.0 / (1.0 + grid.rate[1:]), n),
        )
        self.model = model
        self.grid = grid
        self.terminal_cost = terminal_cost
        self.x0 = x0
        self.engine = engine
        self._n, self._m, self._N, self._K = n, m, N, K
        self._rate = grid.rate
        self._val_key = None
        self._jac_key = None

    # -- layout helpers -------------------------------------------------
    def split(self, v):
        lay = self.variable_layout
        X = v[lay.X].reshape(self._N, self._n)
        U = v[lay.U].reshape(self._K, self._m)
        A = v[lay.A]
        return X, U, A

    def pack(self, X, U, A):
        v = np.empty(self.variable_count)
        lay = self.variable_layout
        v[lay.X] = np.asarray(X, dtype=float).reshape(-1)
        v[lay.U] = np.asarray(U, dtype=float).reshape(-1)
        v[lay.A] = np.asarray(A, dtype=float).reshape(-1)
        return v

    def node_states(self, v):
        X, _, _ = self.split(v)
        return np.vstack([self.x0[None, :], X])

    # -- cached evaluation passes ----------------------------------------
    def _field_batch(self, Xall, U):
        xs = [Xall[:, s] for s in range(self._n)]
        us = [U[:, t] for t in range(self._m)] + [np.ones(self._K)]
        F = self.model.vector_field(xs, us)
        return np.stack(
            [np.broadcast_to(np.asarray(f, dtype=float), (self._K,)) for f in F], axis=1
        )

    def _value_pass(self, v):
        key = v.tobytes()
        if self._val_key == key:
            return self._val_cache
        X, U, A = self.split(v)
        Xall = np.vstack([self.x0[None, :], X])
        F = self._field_batch(Xall, U)
        G = (A * self._rate)[:, None] * F
        xT = self.x0 + self.grid.weights @ G
        res = (self.grid.diff_matrix @ Xall - G[1:]).reshape(-1)
        self._val_key = key
        self._val_cache = (Xall, F, G, xT, res)
        return self._val_cache

    def _jac_pass(self, v):
        key = v.tobytes()
        if self._jac_key == key:
            return self._jac_cache
        Xall, F, G, xT, _ = self._value_pass(v)
        n, m, N, K = self._n, self._m, self._N, self._K
        _, U, A = self.split(v)
        nd = n + m
        comps = seed_duals(np.hstack([Xall, U]), nd)
        xs = comps[:n]
        us = comps[n:] + [np.ones(K)]
        Fd_out = self.model.vector_field(xs, us)
        Fd = np.stack(
            [f.der if isinstance(f, Dual) else np.zeros((K, nd)) for f in Fd_out], axis=1
        )
        ar = A * self._rate
        Gx = ar[:, None, None] * Fd[:, :, :n]      # (K, n, n)
        Gu = ar[:, None, None] * Fd[:, :, n:]      # (K, n, m)
        Ga = self._rate[:, None] * F               # (K, n)
        # d(terminal estimate)/dv
        lay = self.variable_layout
        JT = np.zeros((n, self.variable_count))
        w = self.grid.weights
        for j in range(1, K):
            JT[:, lay.X.start + (j - 1) * n:lay.X.start + j * n] += w[j] * Gx[j]
        for j in range(K):
            if m:
                JT[:, lay.U.start + j * m:lay.U.start + (j + 1) * m] += w[j] * Gu[j]
            JT[:, lay.A.start + j] += w[j] * Ga[j]
        self._jac_key = key
        self._jac_cache = (Gx, Gu, Ga, JT)
        return self._jac_cache

    # -- terminal cost ----------------------------------------------------
    def terminal_estimate(self, v):
        return self._value_pass(v)[3]

    def _cost_terms(self, comps):
        terms = getattr(self.terminal_cost, "terms", None)
        if callable(terms):
            return terms(comps)
        return None

    def _objective_value(self, v):
        xT = self.terminal_estimate(v)
        return float(self.terminal_cost.evaluate(xT))

    def objective_terms(self, v):
        xT = self.terminal_estimate(v)
        vals = self._cost_terms(list(xT))
        if vals is None:
            return None
        return np.array([float(t) for t in vals])

    def objective_terms_jacobian(self, v):
        _, _, _, JT = self._jac_pass(v)
        xT = self.terminal_estimate(v)
        comps = [Dual(np.array([xT[s]]), JT[s][None, :]) for s in range(self._n)]
        terms = self._cost_terms(comps)
        if terms is None:
            raise NotImplementedError("terminal cost does not expose terms")
        rows = []
        for t in terms:
            rows.append(t.der[0] if isinstance(t, Dual) else np.zeros(self.variable_count))
        return np.vstack(rows)

    def objective_gradient(self, v):
        if self.engine.mode == "fd":
            return fd_gradient(self._objective_value, v, step=self.engine.fd_step)
        terms = self.objective_terms(v)
        if terms is not None:
            J = self.objective_terms_jacobian(v)
            return J[int(np.argmax(terms))]
        _, _, _, JT = self._jac_pass(v)
        xT = self.terminal_estimate(v)
        comps = [Dual(np.array([xT[s]]), JT[s][None, :]) for s in range(self._n)]
        out = self.terminal_cost.evaluate(comps)
        if isinstance(out, Dual):
            return out.der[0]
        return fd_gradient(self._objective_value, v)

    # -- equalities --------------------------------------------------------
    def equalities(self, v):
        return self._value_pass(v)[4]

    def equality_jacobian(self, v):
        if self.engine.mode == "fd":
            return fd_jacobian(self.equalities, v, step=self.engine.fd_step)
        Gx, Gu, Ga, _ = self._jac_pass(v)
        n, m, N, K = self._n, self._m, self._N, self._K
        lay = self.variable_layout
        J = np.zeros((n * N, self.variable_count))
        D = self.grid.diff_matrix
        for s in range(n):
            J[s::n, lay.X.start + s:lay.X.stop:n] = D[:, 1:]
        for i in range(1, K):
            r = slice((i - 1) * n, i * n)
            J[r, lay.X.start + (i - 1) * n:lay.X.start + i * n] -= Gx[i]
            if m:
                J[r, lay.U.start + i * m:lay.U.start + (i + 1) * m] -= Gu[i]
            J[r, lay.A.start + i] -= Ga[i]
        return J

    def equality_jtprod(self, v, y):
        if self.engine.mode == "fd":
            return self.equality_jacobian(v).T @ np.asarray(y, dtype=float)
        Gx, Gu, Ga, _ = self._jac_pass(v)
        n, m, N, K = self._n, self._m, self._N, self._K
        lay = self.variable_layout
        Y = np.asarray(y, dtype=float).reshape(N, n)
        g = np.zeros(self.variable_count)
        gX = self.grid.diff_matrix[:, 1:].T @ Y
        gX -= np.einsum("js,jst->jt", Y, Gx[1:])
        g[lay.X] = gX.reshape(-1)
        if m:
            gU = np.zeros((K, m))
            gU[1:] = -np.einsum("js,jst->jt", Y, Gu[1:])
            g[lay.U] = gU.reshape(-1)
        gA = np.zeros(K)
        gA[1:] = -np.einsum("js,js->j", Y, Ga[1:])
        g[lay.A] = gA
        return g

    @property
    def equality_count(self):
        return self._n * self._N


def transcribe(model, grid: CollocationGrid, terminal_cost, x0,
               engine: DerivativeEngine = DerivativeEngine(),
               monotone_freeze=True, freeze_tail=1,
               path_lower_midpoints=True) -> TranscribedProblem:
    """Build the collocation NLP for one initial state.

    ``model`` must already carry the freeze control as its last input (see
    :func:`reachtube.dynamics.augment`); ``terminal_cost`` exposes
    ``evaluate(state_components)`` and, when available, ``terms``.
    """
    return TranscribedProblem(
        model, grid, terminal_cost, x0, engine=engine,
        monotone_freeze=monotone_freeze, freeze_tail=freeze_tail,
        path_lower_midpoints=path_lower_midpoints,
    )
