"""Bound-constrained augmented-Lagrangian solver.

Equalities and linear inequalities enter a Powell-Hestenes-Rockafellar
augmented Lagrangian; the inner subproblem is minimized by a projected
Newton-type iteration (Gauss-Newton curvature from the constraint Jacobians,
damped BFGS when the problem is bounds-only) with an Armijo backtracking line
search along the projected path.

Max-structured objectives (``objective_terms``) are handled internally with
an epigraph variable so the solver never minimizes across a kink.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["SolverTolerances", "NlpSolution", "solve"]


@dataclass(frozen=True)
class SolverTolerances:
    kkt_tol: float = 1e-6
    eq_tol: float = 1e-8
    max_outer: int = 50
    max_inner: int = 500
    max_total: Optional[int] = None     # overall inner-iteration budget
    rho_init: float = 10.0
    rho_max: float = 1e8
    objective_floor: Optional[float] = None  # lower bound on the epigraph variable

    def total_budget(self):
        return self.max_total if self.max_total is not None else self.max_outer * self.max_inner


@dataclass
class NlpSolution:
    status: str                      # converged | max-iterations | infeasible
    objective_value: float
    primal: np.ndarray
    max_equality_violation: float
    kkt_residual: float
    iteration_count: int
    outer_iterations: int = 0
    merit_trace: list = field(default_factory=list)  # (phi_start, phi_end) per outer
    trace: list = field(default_factory=list)        # per-outer diagnostics dicts

    @property
    def converged(self):
        return self.status == "converged"


def solve(problem, initial_guess, tolerances: Optional[SolverTolerances] = None) -> NlpSolution:
    """Minimize ``problem`` from ``initial_guess`` (projected into the box)."""
    tol = tolerances or SolverTolerances()
    nv = problem.variable_count
    v0 = np.clip(np.asarray(initial_guess, dtype=float).reshape(nv),
                 problem.box_lower, problem.box_upper)

    terms0 = problem.objective_terms(v0)
    epigraph = terms0 is not None
    n_terms = terms0.size if epigraph else 0

    P = problem.ineq_matrix
    p_off = problem.ineq_offset
    n_lin = P.shape[0]
    P_dense = P.toarray() if n_lin else np.zeros((0, nv))

    srow = problem.equality_row_scale
    c0 = problem.equalities(v0)
    m_eq = c0.size
    if srow is None:
        srow = np.ones(m_eq)

    if not np.isfinite(problem.objective(v0)) or not np.all(np.isfinite(c0)):
        raise ValueError("invalid start: objective or constraints non-finite at the initial guess")

    # working vector w = [v] or [v, t]
    t_floor = -np.inf if tol.objective_floor is None else float(tol.objective_floor)
    if epigraph:
        w = np.concatenate([v0, [max(float(np.max(terms0)) + 1.0, t_floor)]])
        lbw = np.concatenate([problem.box_lower, [t_floor]])
        ubw = np.concatenate([problem.box_upper, [np.inf]])
    else:
        w = v0.copy()
        lbw, ubw = problem.box_lower, problem.box_upper
    nw = w.size

    lam = np.zeros(m_eq)
    mu_t = np.zeros(n_terms)
    mu_l = np.zeros(n_lin)
    rho = tol.rho_init

    def pieces(wv):
        v = wv[:nv]
        cs = problem.equalities(v) * srow
        if epigraph:
            g_t = problem.objective_terms(v) - wv[nv]
        else:
            g_t = np.zeros(0)
        g_l = (P @ v + p_off) if n_lin else np.zeros(0)
        return v, cs, g_t, g_l

    def phi(wv):
        v, cs, g_t, g_l = pieces(wv)
        base = wv[nv] if epigraph else problem.objective(v)
        pt = np.maximum(0.0, mu_t + rho * g_t)
        pl = np.maximum(0.0, mu_l + rho * g_l)
        val = (base + lam @ cs + 0.5 * rho * (cs @ cs)
               + (pt @ pt - mu_t @ mu_t) / (2.0 * rho)
               + (pl @ pl - mu_l @ mu_l) / (2.0 * rho))
        return val, (v, cs, g_t, g_l, pt, pl)

    def al_gradient(wv, parts):
        v, cs, g_t, g_l, pt, pl = parts
        g = np.zeros(nw)
        if m_eq:
            g[:nv] += problem.equality_jtprod(v, srow * (lam + rho * cs))
        if n_lin:
            g[:nv] += P.T @ pl
        if epigraph:
            Tj = problem.objective_terms_jacobian(v)
            g[:nv] += Tj.T @ pt
            g[nv] = 1.0 - pt.sum()
            return g, Tj
        g[:nv] += problem.objective_gradient(v)
        return g, None

    def gn_hessian(v, pt, pl, Tj):
        blocks = []
        if m_eq:
            Jc = problem.equality_jacobian(v) * srow[:, None]
            if epigraph:
                Jc = np.hstack([Jc, np.zeros((m_eq, 1))])
            blocks.append(Jc)
        if epigraph and np.any(pt > 0.0):
            act = pt > 0.0
            blocks.append(np.hstack([Tj[act], -np.ones((int(act.sum()), 1))]))
        if n_lin and np.any(pl > 0.0):
            act = pl > 0.0
            rows = P_dense[act]
            if epigraph:
                rows = np.hstack([rows, np.zeros((rows.shape[0], 1))])
            blocks.append(rows)
        if not blocks:
            return None
        J = np.vstack(blocks)
        return rho * (J.T @ J)

    bounds_only = m_eq == 0 and n_lin == 0 and not epigraph

    viol_prev = np.inf
    eta = 0.5
    omega = 1e-2
    it_total = 0
    merit_trace = []
    trace_rows = []
    status = "max-iterations"
    budget = tol.total_budget()
    kkt = np.inf
    viol_true = np.inf

    for outer in range(tol.max_outer):
        f, parts = phi(w)
        phi_start = f
        nu = 1e-6
        B = np.eye(nw) if bounds_only else None
        g_prev = None
        w_prev = None
        inner = 0
        while inner < tol.max_inner and it_total < budget:
            inner += 1
            it_total += 1
            g, Tj = al_gradient(w, parts)
            if np.max(np.abs(w - np.clip(w - g, lbw, ubw))) <= omega:
                break
            if bounds_only:
                if g_prev is not None:
                    s = w - w_prev
                    q = g - g_prev
                    sq = s @ q
                    if sq > 1e-12 * np.linalg.norm(s) * np.linalg.norm(q):
                        Bs = B @ s
                        B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(q, q) / sq
                H = B
            else:
                v, cs, g_t, g_l, pt, pl = parts
                H = gn_hessian(v, pt, pl, Tj)
                if H is None:
                    H = np.eye(nw)
            at_lo = (w <= lbw + 1e-12) & (g > 0.0)
            at_hi = (w >= ubw - 1e-12) & (g < 0.0)
            free = ~(at_lo | at_hi)
            d = np.zeros(nw)
            nf = int(free.sum())
            if nf:
                Hf = H[np.ix_(free, free)].copy()
                Hf[np.diag_indices(nf)] += nu * (1.0 + np.abs(np.diag(Hf)))
                try:
                    L = np.linalg.cholesky(Hf)
                    d[free] = -np.linalg.solve(L.T, np.linalg.solve(L, g[free]))
                except np.linalg.LinAlgError:
                    d[free] = -g[free]
                if g[free] @ d[free] > 0.0:
                    d[free] = -g[free]
            g_prev, w_prev = g, w
            alpha = 1.0
            accepted = False
            for _ in range(30):
                w_trial = np.clip(w + alpha * d, lbw, ubw)
                f_trial, parts_trial = phi(w_trial)
                if f_trial <= f + 1e-4 * min(0.0, g @ (w_trial - w)):
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                nu = min(nu * 30.0, 1e3)
                if nu >= 1e3:
                    break
                continue
            nu = max(nu * 0.5, 1e-9)
            w, f, parts = w_trial, f_trial, parts_trial

        v, cs, g_t, g_l, pt, pl = parts
        c_true = problem.equalities(v)
        viol_true = float(max(
            np.max(np.abs(c_true)) if m_eq else 0.0,
            float(np.max(g_t)) if n_terms else 0.0,
            float(np.max(g_l)) if n_lin else 0.0,
            0.0,
        ))
        sviol = float(max(
            np.max(np.abs(cs)) if m_eq else 0.0,
            float(np.max(g_t)) if n_terms else 0.0,
            float(np.max(g_l)) if n_lin else 0.0,
            0.0,
        ))
        lam_new = lam + rho * cs
        mu_t_new = np.maximum(0.0, mu_t + rho * g_t)
        mu_l_new = np.maximum(0.0, mu_l + rho * g_l)
        gL = np.zeros(nw)
        if m_eq:
            gL[:nv] += problem.equality_jtprod(v, srow * lam_new)
        if n_lin:
            gL[:nv] += P.T @ mu_l_new
        if epigraph:
            Tj = problem.objective_terms_jacobian(v)
            gL[:nv] += Tj.T @ mu_t_new
            gL[nv] = 1.0 - mu_t_new.sum()
        else:
            gL[:nv] += problem.objective_gradient(v)
        kkt = float(np.max(np.abs(w - np.clip(w - gL, lbw, ubw))))
        merit_trace.append((phi_start, f))
        trace_rows.append(dict(outer=outer, inner=inner, viol=viol_true, kkt=kkt,
                               rho=rho, objective=problem.objective(v)))
        if viol_true <= tol.eq_tol and kkt <= tol.kkt_tol:
            status = "converged"
            break
        if it_total >= budget:
            status = "max-iterations"
            break
        stalled = viol_true > 0.5 * viol_prev and viol_true > tol.eq_tol
        viol_prev = viol_true
        if sviol <= eta and not stalled:
            lam, mu_t, mu_l = lam_new, mu_t_new, mu_l_new
            eta = max(eta * 0.2, tol.eq_tol)
            omega = max(omega * 0.2, 0.3 * tol.kkt_tol)
        else:
            if rho >= tol.rho_max and stalled and inner == 0:
                status = "infeasible"
                break
            rho = min(rho * 10.0, tol.rho_max)
            lam, mu_t, mu_l = lam_new, mu_t_new, mu_l_new
            eta = max(eta * 0.5, tol.eq_tol)
            omega = max(omega * 0.5, 0.3 * tol.kkt_tol)

    v_final = w[:nv]
    return NlpSolution(
        status=status,
        objective_value=problem.objective(v_final),
        primal=v_final,
        max_equality_violation=viol_true,
        kkt_residual=kkt,
        iteration_count=it_total,
        outer_iterations=len(merit_trace),
        merit_trace=merit_trace,
        trace=trace_rows,
    )
