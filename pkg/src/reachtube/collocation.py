"""Legendre-Gauss-Radau collocation: nodes, weights, differentiation, time transform.

The node family lives on [-1, 1): the left endpoint is included, the right
endpoint is excluded, which keeps the log time transform finite at every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "lgr_nodes_weights",
    "barycentric_weights",
    "interpolation_matrix",
    "differentiation_matrix",
    "time_forward",
    "time_inverse",
    "time_rate",
    "interpolate_trajectory",
    "CollocationGrid",
]


def lgr_nodes_weights(count):
    """Radau nodes and quadrature weights on [-1, 1).

    The ``count`` nodes are the roots of P_{count-1} + P_count (Legendre
    polynomials), sorted ascending; the first node is exactly -1.  The weights
    integrate polynomials of degree <= 2*count - 2 exactly over [-1, 1].
    """
    K = int(count)
    if K < 1:
        raise ValueError(f"node count must be >= 1, got {count}")
    if K == 1:
        return np.array([-1.0]), np.array([2.0])

    # Chebyshev-Gauss-Radau points start the Newton iteration.
    x = -np.cos(2.0 * np.pi * np.arange(K) / (2 * K - 1))
    P = np.zeros((K, K + 1))
    free = np.arange(1, K)
    xold = np.full_like(x, 2.0)
    for _ in range(200):
        if np.max(np.abs(x - xold)) <= 5e-16:
            break
        xold = x.copy()
        P[0, :] = (-1.0) ** np.arange(K + 1)
        P[free, 0] = 1.0
        P[free, 1] = x[free]
        for k in range(1, K):
            P[free, k + 1] = ((2 * k + 1) * x[free] * P[free, k] - k * P[free, k - 1]) / (k + 1)
        # Newton step for P_{K-1} + P_K, using the identity
        # (1 - x) (P'_{K-1} + P'_K) = K (P_{K-1} - P_K).
        x[free] = xold[free] - ((1.0 - xold[free]) / K) * (
            (P[free, K - 1] + P[free, K]) / (P[free, K - 1] - P[free, K])
        )
    else:
        raise RuntimeError(f"Radau node iteration failed to converge for count={K}")

    x[0] = -1.0
    w = np.empty(K)
    w[0] = 2.0 / K**2
    w[free] = (1.0 - x[free]) / (K * P[free, K - 1]) ** 2
    return x, w


def barycentric_weights(nodes):
    """Weights of the barycentric Lagrange form over ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 1:
        raise ValueError("nodes must be a non-empty 1-D array")
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise ValueError("support nodes must be distinct")
    return 1.0 / np.prod(diff, axis=1)


def interpolation_matrix(support_nodes, query_points):
    """Matrix M with M[i, j] = L_j(query_i) for the Lagrange basis over support."""
    support = np.asarray(support_nodes, dtype=float)
    queries = np.atleast_1d(np.asarray(query_points, dtype=float))
    b = barycentric_weights(support)
    M = np.zeros((queries.size, support.size))
    for i, xq in enumerate(queries):
        d = xq - support
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            M[i, hit[0]] = 1.0
        else:
            c = b / d
            M[i] = c / c.sum()
    return M


def differentiation_matrix(support_nodes, eval_nodes):
    """Matrix D with D[i, j] = L'_j(eval_i) for the Lagrange basis over support.

    Uses the barycentric form; eval points may coincide with support nodes.
    """
    support = np.asarray(support_nodes, dtype=float)
    evalp = np.atleast_1d(np.asarray(eval_nodes, dtype=float))
    b = barycentric_weights(support)
    n = support.size
    D = np.zeros((evalp.size, n))
    idx = np.arange(n)
    for i, xe in enumerate(evalp):
        hit = np.nonzero(xe == support)[0]
        if hit.size:
            j0 = hit[0]
            mask = idx != j0
            row = np.zeros(n)
            row[mask] = (b[mask] / b[j0]) / (xe - support[mask])
            row[j0] = -row[mask].sum()
            D[i] = row
        else:
            d = xe - support
            c = b / d
            L = c / c.sum()
            s = np.sum(1.0 / d)
            D[i] = L * (s - 1.0 / d)
    return D


def time_forward(tau, c):
    """Map computation time tau in [-1, 1) to physical time s = c*log(2/(1-tau))."""
    tau = np.asarray(tau, dtype=float)
    if c <= 0:
        raise ValueError("transform constant must be positive")
    if np.any(tau >= 1.0) or np.any(tau < -1.0):
        raise ValueError("tau must lie in [-1, 1)")
    return c * np.log(2.0 / (1.0 - tau))


def time_inverse(s, c):
    """Inverse of :func:`time_forward`: tau = 1 - 2*exp(-s/c)."""
    s = np.asarray(s, dtype=float)
    if c <= 0:
        raise ValueError("transform constant must be positive")
    if np.any(s < 0.0):
        raise ValueError("s must be nonnegative")
    return 1.0 - 2.0 * np.exp(-s / c)


def time_rate(tau, c):
    """ds/dtau = c/(1-tau), the factor that scales dynamics onto the tau axis."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau >= 1.0):
        raise ValueError("tau must lie in [-1, 1)")
    return c / (1.0 - tau)


@dataclass(frozen=True)
class CollocationGrid:
    """Radau grid with N+1 nodes tau_0..tau_N and the N x (N+1) derivative map.

    ``node_count`` is N: the dynamics are collocated at tau_1..tau_N (the rows
    of ``diff_matrix``); tau_0 = -1 carries the initial condition.  Immutable
    and safe to share between workers.
    """

    node_count: int
    transform_constant: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    diff_matrix: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, node_count, transform_constant=3.0):
        N = int(node_count)
        if N < 1:
            raise ValueError("node_count must be >= 1")
        if transform_constant <= 0:
            raise ValueError("transform constant must be positive")
        nodes, weights = lgr_nodes_weights(N + 1)
        D = differentiation_matrix(nodes, nodes[1:])
        grid = cls(
            node_count=N,
            transform_constant=float(transform_constant),
            nodes=nodes,
            weights=weights,
            diff_matrix=D,
        )
        nodes.setflags(write=False)
        weights.setflags(write=False)
        D.setflags(write=False)
        return grid

    @property
    def rate(self):
        """c/(1-tau) at every node."""
        return self.transform_constant / (1.0 - self.nodes)

    @property
    def times(self):
        """Physical node times s_j = c*log(2/(1-tau_j))."""
        return time_forward(self.nodes, self.transform_constant)

    def barycentric(self):
        return barycentric_weights(self.nodes)


def interpolate_trajectory(grid, node_states, tau_query):
    """Evaluate the Lagrange interpolant of per-node states at ``tau_query``.

    ``node_states`` has one row per grid node; exact at the nodes, barycentric
    elsewhere.  tau_query may be a scalar in [-1, 1] or an array.
    """
    states = np.asarray(node_states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
        squeeze_cols = True
    else:
        squeeze_cols = False
    if states.shape[0] != grid.nodes.size:
        raise ValueError(
            f"node_states has {states.shape[0]} rows, grid has {grid.nodes.size} nodes"
        )
    q = np.asarray(tau_query, dtype=float)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    if np.any(q < -1.0) or np.any(q > 1.0):
        raise ValueError("tau_query must lie in [-1, 1]")
    M = interpolation_matrix(grid.nodes, q)
    out = M @ states
    if squeeze_cols:
        out = out[:, 0]
    return out[0] if scalar else out
