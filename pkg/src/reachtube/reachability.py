"""Backward-reachable-tube membership by trajectory optimization.

``solve_value`` estimates the landing value function at one initial state:
the best terminal cost reachable under the frozen-dynamics formulation.  A
state is certified safe only when an independently integrated trajectory
(replay) actually enters the target set, so discretization artifacts cannot
produce false safety claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .collocation import CollocationGrid, barycentric_weights
from .dynamics import DynamicsModel, augment
from .nlp import DerivativeEngine, SolverTolerances, solve, transcribe

__all__ = [
    "TerminalSurface",
    "box_level_surface",
    "ReachProblem",
    "ReachResult",
    "ReplayRecord",
    "SafetyClass",
    "solve_value",
    "optimal_time",
    "classify",
    "replay_verify",
]

SAFE = "safe"
UNSAFE = "unsafe"
MARGINAL = "marginal"


@dataclass(frozen=True)
class TerminalSurface:
    """Implicit target set {x : evaluate(x) <= 0}.

    ``terms`` (optional) lists smooth functions of the state components whose
    pointwise max equals ``evaluate``; solvers use it to avoid optimizing
    across the max kink.
    """

    evaluate: Callable
    terms: Optional[Callable] = None
    description: str = ""


def box_level_surface(component_bounds, normalized=False, description=""):
    """max_i (|x_i| - b_i) over selected components (optionally /b_i).

    ``component_bounds`` is a sequence of (state index, positive bound).
    """
    comps = [(int(i), float(b)) for i, b in component_bounds]
    for _, b in comps:
        if b <= 0.0:
            raise ValueError("bounds must be positive")

    def terms(x):
        out = []
        for i, b in comps:
            scale = b if normalized else 1.0
            out.append((x[i] - b) / scale)
            out.append((-1.0 * x[i] - b) / scale)
        return out

    def evaluate(x):
        vals = terms(x)
        out = vals[0]
        for t in vals[1:]:
            out = out.maximum(t) if hasattr(out, "maximum") else np.maximum(out, t)
        return out

    return TerminalSurface(evaluate=evaluate, terms=terms, description=description)


@dataclass(frozen=True)
class ReachProblem:
    """A reachability query: dynamics + target surface + discretization.

    ``guidance_policies`` are state-feedback laws used to build physically
    consistent starts (and standalone safety certificates); ``initial_controls``
    seeds the constant cold start (trim controls for the helicopter).
    """

    model: DynamicsModel
    surface: TerminalSurface
    node_count: int = 24
    transform_constant: float = 3.0
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    margin: float = 1e-3
    monotone_freeze: bool = True
    freeze_tail: int = 1
    objective_floor: Optional[float] = -0.5
    replay_gate_tol: float = 1e-2
    replay_state_slack: Optional[float] = None
    freeze_level: float = -0.05
    guidance_policies: Sequence[Callable] = ()
    initial_controls: Optional[np.ndarray] = None
    engine: DerivativeEngine = field(default_factory=DerivativeEngine)
    thorough: bool = True
    polish_rounds: int = 2
    solve_budget: Optional[int] = 400

    def grid(self) -> CollocationGrid:
        return CollocationGrid.build(self.node_count, self.transform_constant)

    def augmented(self) -> DynamicsModel:
        return augment(self.model)

    def state_slack(self, x0):
        if self.replay_state_slack is not None:
            return self.replay_state_slack
        return max(0.5, 0.01 * float(np.max(np.abs(np.asarray(x0, dtype=float)))))


@dataclass
class ReachResult:
    value: float
    t_star: float
    node_states: np.ndarray
    terminal_state: np.ndarray
    node_controls: np.ndarray
    node_a: np.ndarray
    status: str                      # converged | certificate | frozen | failed
    replay_terminal_error: Optional[float] = None
    iterations: int = 0
    primal: Optional[np.ndarray] = None
    entry_time: Optional[float] = None
    entry_state: Optional[np.ndarray] = None

    @property
    def solver_failed(self):
        return self.status == "failed"


@dataclass(frozen=True)
class ReplayRecord:
    terminal_state: np.ndarray
    terminal_J: float
    max_node_deviation: float
    min_path_J: float
    entry_time: Optional[float]
    entry_state: Optional[np.ndarray]
    lower_bound_margin: float   # most negative (state - lower_bound) before entry
    success: bool


@dataclass(frozen=True)
class SafetyClass:
    label: str
    value: float
    solver_failed: bool = False


def optimal_time(node_a, grid: CollocationGrid):
    """Landing time t* = sum_j w_j a_j c/(1 - tau_j)."""
    a = np.asarray(node_a, dtype=float)
    if a.size != grid.nodes.size:
        raise ValueError("node_a length does not match the grid")
    return float(np.sum(grid.weights * a * grid.rate))


# ---------------------------------------------------------------------------
# replay: independent integration of a discrete solution
# ---------------------------------------------------------------------------

def _replay_trajectory(problem: ReachProblem, grid, node_states, node_controls, node_a,
                       dense_per_interval=8, rtol=1e-8, atol=1e-10):
    """Integrate the transformed dynamics under the interpolated controls.

    Controls are barycentric-interpolated then clipped into their box; the
    freeze signal is floored at zero but not capped (any a >= 0 is a valid
    time rescaling, so the integrated path is a genuine system trajectory).
    """
    model = problem.model
    tau = grid.nodes
    bw = barycentric_weights(tau)
    U = np.asarray(node_controls, dtype=float)
    A = np.asarray(node_a, dtype=float)
    Xn = np.asarray(node_states, dtype=float)
    u_lo, u_hi = model.control_lower, model.control_upper
    c = grid.transform_constant

    def interp(vals, t):
        d = t - tau
        hit = np.nonzero(np.abs(d) < 1e-14)[0]
        if hit.size:
            return vals[hit[0]]
        w = bw / d
        return (w @ vals) / w.sum()

    def rhs(t, x):
        u = np.clip(interp(U, t), u_lo, u_hi)
        a = max(0.0, float(interp(A[:, None], t)[0]))
        f = model(x, u)
        return (c / (1.0 - t)) * a * f

    t_dense = []
    for j in range(1, tau.size):
        t_dense.extend(np.linspace(tau[j - 1], tau[j], dense_per_interval, endpoint=False))
    t_dense.append(tau[-1])
    t_dense = np.array(t_dense)

    sol = solve_ivp(rhs, (tau[0], tau[-1]), Xn[0], t_eval=t_dense,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        return None
    Xd = sol.y.T

    # pseudo-time along the dense grid (trapezoid on a*rate)
    a_d = np.array([max(0.0, float(interp(A[:, None], t)[0])) for t in t_dense])
    rate_d = c / (1.0 - t_dense)
    integrand = a_d * rate_d
    s_d = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t_dense))])

    J_d = np.array([float(problem.surface.evaluate(list(x))) for x in Xd])
    k_min = int(np.argmin(J_d))
    entry = None
    gate = problem.replay_gate_tol
    hits = np.nonzero(J_d <= gate)[0]
    if hits.size:
        entry = int(hits[0])

    x_lo, _ = model.state_bounds()
    upto = entry + 1 if entry is not None else Xd.shape[0]
    finite = np.isfinite(x_lo)
    if np.any(finite):
        margins = (Xd[:upto][:, finite] - x_lo[finite]).min()
    else:
        margins = np.inf

    node_idx = np.searchsorted(t_dense, tau)
    dev = float(np.max(np.abs(Xd[np.clip(node_idx, 0, len(t_dense) - 1)] - Xn)))

    return ReplayRecord(
        terminal_state=Xd[-1],
        terminal_J=float(J_d[-1]),
        max_node_deviation=dev,
        min_path_J=float(J_d[k_min]),
        entry_time=float(s_d[entry]) if entry is not None else None,
        entry_state=Xd[entry].copy() if entry is not None else None,
        lower_bound_margin=float(margins),
        success=True,
    )


def replay_verify(result: ReachResult, problem: ReachProblem) -> ReplayRecord:
    """Re-integrate a solved trajectory with an adaptive high-order integrator.

    Reports the integrated terminal state, its terminal cost, and the largest
    deviation from the solved node states.
    """
    if result.status == "failed":
        raise ValueError("cannot replay a failed solve")
    rec = _replay_trajectory(problem, problem.grid(), result.node_states,
                             result.node_controls, result.node_a)
    if rec is None:
        return ReplayRecord(
            terminal_state=result.node_states[-1], terminal_J=math.inf,
            max_node_deviation=math.inf, min_path_J=math.inf,
            entry_time=None, entry_state=None, lower_bound_margin=-math.inf,
            success=False,
        )
    return rec


def _gate_pass(problem: ReachProblem, rec: Optional[ReplayRecord], slack):
    if rec is None or not rec.success:
        return False
    return rec.min_path_J <= problem.replay_gate_tol and rec.lower_bound_margin >= -slack


# ---------------------------------------------------------------------------
# starts: guided rollouts and the constant cold start
# ---------------------------------------------------------------------------

def _rollout(problem: ReachProblem, grid, x0, policy, substeps=24):
    """Integrate a feedback policy on the node grid; freeze on target entry.

    Returns (node_states, node_controls, node_a, best_J, entry_time) with the
    integration stopped at any state-lower-bound violation.
    """
    model = problem.model
    K = grid.nodes.size
    m = model.control_dim
    X = np.zeros((K, model.state_dim))
    U = np.zeros((K, m))
    A = np.ones(K)
    x = np.asarray(x0, dtype=float).copy()
    X[0] = x
    U[0] = np.clip(policy(x), model.control_lower, model.control_upper)
    x_lo, _ = model.state_bounds()
    J0 = float(problem.surface.evaluate(list(x)))
    best_J = J0
    s_now = 0.0
    entry_time = 0.0 if J0 <= problem.freeze_level else None
    frozen = entry_time is not None
    c = grid.transform_constant
    for j in range(1, K):
        if not frozen:
            t0, t1 = grid.nodes[j - 1], grid.nodes[j]
            hstep = (t1 - t0) / substeps
            for k in range(substeps):
                ta = t0 + hstep * k

                def f(t, q):
                    u = np.clip(policy(q), model.control_lower, model.control_upper)
                    return (c / (1.0 - t)) * model(q, u)

                k1 = f(ta, x)
                k2 = f(ta + 0.5 * hstep, x + 0.5 * hstep * k1)
                k3 = f(ta + 0.5 * hstep, x + 0.5 * hstep * k2)
                k4 = f(ta + hstep, x + hstep * k3)
                x_new = x + (hstep / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                if np.any(x_new < x_lo - 1e-9):
                    frozen = True   # bound violated: trajectory ends at the last valid state
                    break
                x = x_new
                s_now += hstep * (c / (1.0 - (ta + 0.5 * hstep)))
                J = float(problem.surface.evaluate(list(x)))
                best_J = min(best_J, J)
                if J <= problem.freeze_level:
                    frozen = True
                    entry_time = s_now
                    break
        X[j] = x
        U[j] = np.clip(policy(x), model.control_lower, model.control_upper)
        if frozen:
            A[j] = 0.0
    return X, U, A, best_J, entry_time


def _cold_start(problem: ReachProblem, grid, x0, trans):
    x_lo, x_hi = problem.model.state_bounds()
    xc = np.clip(np.asarray(x0, dtype=float), x_lo, x_hi)
    if problem.initial_controls is not None:
        u0 = np.asarray(problem.initial_controls, dtype=float)
    else:
        u0 = problem.model.control_mid()
    K = grid.nodes.size
    X = np.tile(xc, (trans._N, 1))
    U = np.tile(u0, (K, 1))
    A = np.ones(K)
    return trans.pack(X, U, np.clip(A, trans.box_lower[trans.variable_layout.A],
                                    trans.box_upper[trans.variable_layout.A]))


# ---------------------------------------------------------------------------
# the value solve
# ---------------------------------------------------------------------------

def _candidate_from_solution(problem, grid, trans, sol):
    Xall = trans.node_states(sol.primal)
    _, U, A = trans.split(sol.primal)
    return dict(
        value=float(sol.objective_value),
        node_states=Xall,
        node_controls=U,
        node_a=A.copy(),
        t_star=optimal_time(A, grid),
        primal=sol.primal.copy(),
        iterations=sol.iteration_count,
        kind="nlp",
    )


def solve_value(problem: ReachProblem, x0, warm_start=None) -> ReachResult:
    """Value of the landing problem at ``x0``; certified-safe when negative.

    Candidates: the warm start (when given), one guided rollout per policy,
    and the constant cold start.  Negative claimed values must survive replay
    gating; rollouts that enter the target on their own stand as simulation
    certificates even when every optimizer run fails.
    """
    x0 = np.asarray(x0, dtype=float).reshape(problem.model.state_dim)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    x_lo, x_hi = problem.model.state_bounds()
    if np.any(x0 < x_lo - 1e-12) or np.any(x0 > x_hi + 1e-12):
        raise ValueError("x0 violates the declared state bounds")

    grid = problem.grid()
    trans = transcribe(
        problem.augmented(), grid, problem.surface, x0,
        engine=problem.engine,
        monotone_freeze=problem.monotone_freeze,
        freeze_tail=problem.freeze_tail,
    )
    tol = problem.tolerances
    if problem.solve_budget is not None:
        tol = dc_replace(tol, max_total=problem.solve_budget)
    tol = dc_replace(tol, objective_floor=problem.objective_floor)
    slack = problem.state_slack(x0)
    frozen_value = float(problem.surface.evaluate(list(x0)))
    eps = problem.margin

    starts = []
    if warm_start is not None:
        w = warm_start.primal if isinstance(warm_start, ReachResult) else warm_start
        if w is not None:
            starts.append(("warm", np.asarray(w, dtype=float)))
    sim_certificate = None
    for policy in problem.guidance_policies:
        X, U, A, best_J, entry_time = _rollout(problem, grid, x0, policy)
        v = trans.pack(X[1:], U, np.clip(A, trans.box_lower[trans.variable_layout.A],
                                         trans.box_upper[trans.variable_layout.A]))
        starts.append(("rollout", v))
        if best_J <= -eps and entry_time is not None:
            if sim_certificate is None or best_J < sim_certificate["value"]:
                sim_certificate = dict(
                    value=best_J, node_states=X, node_controls=U, node_a=A,
                    t_star=entry_time, primal=v, iterations=0, kind="certificate",
                    entry_time=entry_time,
                )
    starts.append(("cold", _cold_start(problem, grid, x0, trans)))

    accepted = []
    total_iters = 0
    for name, start in starts:
        try:
            sol = solve(trans, start, tol)
        except ValueError:
            continue
        total_iters += sol.iteration_count
        cand = None
        for _ in range(problem.polish_rounds + 1):
            if not sol.converged:
                break
            cand = _candidate_from_solution(problem, grid, trans, sol)
            if cand["value"] > -eps:
                cand["replay"] = None
                break
            rec = _replay_trajectory(problem, grid, cand["node_states"],
                                     cand["node_controls"], cand["node_a"])
            if _gate_pass(problem, rec, slack):
                cand["replay"] = rec
                break
            cand = None
            if rec is None or not rec.success:
                break
            # restart from the replayed (physically consistent) trajectory
            sol = _polish_resolve(problem, grid, trans, tol, sol, rec)
            if sol is None:
                break
            total_iters += sol.iteration_count
        if cand is not None:
            accepted.append(cand)
            if not problem.thorough and cand["value"] <= -eps:
                break

    candidates = list(accepted)
    if sim_certificate is not None:
        candidates.append(sim_certificate)
    frozen = dict(
        value=frozen_value,
        node_states=np.tile(x0, (grid.nodes.size, 1)),
        node_controls=np.tile(problem.model.control_mid(), (grid.nodes.size, 1)),
        node_a=np.zeros(grid.nodes.size),
        t_star=0.0,
        primal=None,
        iterations=0,
        kind="frozen",
    )
    candidates.append(frozen)

    best = min(candidates, key=lambda c: c["value"])
    if any(c["kind"] == "nlp" for c in accepted):
        status = "converged"
    elif sim_certificate is not None:
        status = "certificate"
    elif frozen_value <= 0.0:
        status = "frozen"
    else:
        status = "failed"

    rec = best.get("replay")
    replay_err = None
    entry_time = best.get("entry_time")
    entry_state = None
    if isinstance(rec, ReplayRecord):
        replay_err = abs(rec.min_path_J - best["value"])
        entry_time = rec.entry_time
        entry_state = rec.entry_state

    return ReachResult(
        value=float(best["value"]),
        t_star=float(best["t_star"]),
        node_states=best["node_states"],
        terminal_state=(trans.terminal_estimate(best["primal"])
                        if best["primal"] is not None and best["kind"] == "nlp"
                        else best["node_states"][-1].copy()),
        node_controls=best["node_controls"],
        node_a=best["node_a"],
        status=status,
        replay_terminal_error=replay_err,
        iterations=total_iters,
        primal=(best["primal"] if best["primal"] is not None else
                (accepted[0]["primal"] if accepted else None)),
        entry_time=entry_time,
        entry_state=entry_state,
    )


def _polish_resolve(problem, grid, trans, tol, sol, rec: ReplayRecord):
    """Re-solve from the replayed trajectory to re-anchor the physical basin."""
    x_lo, x_hi = problem.model.state_bounds()
    K = grid.nodes.size
    Xall = trans.node_states(sol.primal)
    _, U, A = trans.split(sol.primal)
    # rebuild: node states from the replayed path, crisp freeze profile
    Xr = np.clip(np.vstack([Xall[0][None, :], _node_replay_states(problem, grid, Xall, U, A)]),
                 x_lo, x_hi)
    Js = np.array([float(problem.surface.evaluate(list(x))) for x in Xr])
    A_new = np.ones(K)
    inside = np.nonzero(Js <= problem.freeze_level)[0]
    if inside.size:
        A_new[inside[0]:] = 0.0
    lay = trans.variable_layout
    start = trans.pack(Xr[1:], U, np.clip(A_new, trans.box_lower[lay.A], trans.box_upper[lay.A]))
    try:
        return solve(trans, start, tol)
    except ValueError:
        return None


def _node_replay_states(problem, grid, node_states, node_controls, node_a):
    model = problem.model
    tau = grid.nodes
    bw = barycentric_weights(tau)
    U = np.asarray(node_controls, dtype=float)
    A = np.asarray(node_a, dtype=float)
    c = grid.transform_constant
    u_lo, u_hi = model.control_lower, model.control_upper

    def interp(vals, t):
        d = t - tau
        hit = np.nonzero(np.abs(d) < 1e-14)[0]
        if hit.size:
            return vals[hit[0]]
        w = bw / d
        return (w @ vals) / w.sum()

    def rhs(t, x):
        u = np.clip(interp(U, t), u_lo, u_hi)
        a = max(0.0, float(interp(A[:, None], t)[0]))
        return (c / (1.0 - t)) * a * model(x, u)

    sol = solve_ivp(rhs, (tau[0], tau[-1]), np.asarray(node_states[0], dtype=float),
                    t_eval=tau[1:], method="DOP853", rtol=1e-8, atol=1e-10)
    if not sol.success:
        return node_states[1:]
    return sol.y.T


def classify(problem: ReachProblem, x0, warm_start=None) -> SafetyClass:
    """Threshold the solved value at +-margin; failures are conservatively unsafe."""
    result = solve_value(problem, x0, warm_start=warm_start)
    return classify_result(result, problem.margin)


def classify_result(result: ReachResult, margin) -> SafetyClass:
    if result.status == "failed":
        return SafetyClass(label=UNSAFE, value=result.value, solver_failed=True)
    if result.value <= -margin:
        return SafetyClass(label=SAFE, value=result.value)
    if result.value >= margin:
        return SafetyClass(label=UNSAFE, value=result.value)
    return SafetyClass(label=MARGINAL, value=result.value)
