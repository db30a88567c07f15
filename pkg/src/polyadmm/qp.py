"""Small dense quadratic and linear programming helpers.

The QP solver is a primal active-set method for convex problems

    min  0.5 x^T H x + c^T x   s.t.  G x <= h,  E x = e

with ``H`` positive semidefinite.  Working-set subproblems are solved in a
null-space basis; directions of zero curvature along which the objective
decreases are followed to the nearest blocking constraint, so semidefinite
objectives (epigraph prox, least-squares over generators) are handled as
long as the problem is bounded.  Pivoting is deterministic: blocking
constraints and dropped constraints are chosen by lowest index on ties.

Linear programs (feasibility, implicit equalities) go to scipy's HiGHS.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, SolverError, TAU_GEOM

_HIGHS_OPTS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class QPResult:
    x: np.ndarray
    ineq_multipliers: np.ndarray
    eq_multipliers: np.ndarray
    active: tuple
    iterations: int
    kkt_residual: float


def _as2d(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, n))
    return M


def _null_space(M, n):
    if M.shape[0] == 0:
        return np.eye(n)
    scale = np.linalg.norm(M, axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    _, s, vt = np.linalg.svd(M / scale, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def _independent(M, row):
    if M.shape[0] == 0:
        return np.linalg.norm(row) > 0
    stacked = np.vstack([M, row])
    scale = np.linalg.norm(stacked, axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    s = np.linalg.svd(stacked / scale, compute_uv=False)
    return s[-1] > 1e-10 * s[0]


def solve_qp(H, c, G=None, h=None, E=None, e=None, x0=None, max_iter=None):
    """Solve a convex QP by a primal active-set method.

    ``x0`` must be feasible (to roughly 1e-9); if omitted, a feasible point
    is obtained from an LP.  Raises ``SolverError`` on unboundedness or
    iteration exhaustion and ``InfeasibleError`` on an empty feasible set.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    G = _as2d(G, n)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float).ravel()
    E = _as2d(E, n)
    e = np.zeros(0) if e is None else np.asarray(e, dtype=float).ravel()
    m_in, m_eq = G.shape[0], E.shape[0]

    if x0 is None:
        x0 = feasible_point(G, h, E, e)
    x = np.array(x0, dtype=float).ravel()

    gnorm = np.linalg.norm(G, axis=1) if m_in else np.zeros(0)
    act_tol = 1e-9 * (1.0 + np.abs(h) + gnorm * np.linalg.norm(x))

    # initial working set: active rows, greedily independent, lowest index first
    W = []
    M = E.copy()
    for i in range(m_in):
        if G[i] @ x >= h[i] - act_tol[i] and _independent(M, G[i]):
            W.append(i)
            M = np.vstack([M, G[i]])
    if M.shape[0]:
        rhs = np.concatenate([e, h[W]])
        x = x + np.linalg.lstsq(M, rhs - M @ x, rcond=None)[0]

    if max_iter is None:
        max_iter = 50 * (n + m_in + m_eq) + 100

    for it in range(1, max_iter + 1):
        M = np.vstack([E, G[W]]) if W else E
        grad = H @ x + c
        Z = _null_space(M, n)
        step_tol = 1e-12 * (1.0 + np.linalg.norm(x))
        p = np.zeros(n)
        ray = False
        if Z.shape[1]:
            Hr = Z.T @ H @ Z
            gr = Z.T @ grad
            d, V = np.linalg.eigh(0.5 * (Hr + Hr.T))
            pos = d > 1e-12 * max(1.0, np.abs(d).max())
            gn = V[:, ~pos].T @ gr
            if np.linalg.norm(gn) > 1e-12 * (1.0 + np.linalg.norm(grad)):
                p = -Z @ (V[:, ~pos] @ gn)
                ray = True
            else:
                Vp = V[:, pos]
                p = -Z @ (Vp @ ((Vp.T @ gr) / d[pos]))

        if not ray and np.linalg.norm(p) <= step_tol:
            if M.shape[0]:
                mult = np.linalg.lstsq(M.T, -grad, rcond=None)[0]
            else:
                mult = np.zeros(0)
            mu_in = mult[m_eq:]
            if len(W) == 0 or mu_in.min() >= -1e-10 * (1.0 + np.abs(mu_in).max()):
                lam = np.zeros(m_in)
                lam[W] = np.maximum(mu_in, 0.0)
                nu = mult[:m_eq]
                kkt = np.linalg.norm(grad + G.T @ lam + E.T @ nu)
                return QPResult(x, lam, nu, tuple(sorted(W)), it, kkt)
            j = int(np.argmin(mu_in))
            W.pop(j)
            continue

        # ratio test; lowest index wins ties
        alpha = np.inf if ray else 1.0
        block = None
        if m_in:
            Gp = G @ p
            for i in range(m_in):
                if i in W or Gp[i] <= 1e-14 * gnorm[i] * np.linalg.norm(p):
                    continue
                a = max(h[i] - G[i] @ x, 0.0) / Gp[i]
                if a < alpha:
                    alpha, block = a, i
        if block is None and ray:
            raise SolverError("QP unbounded below along a zero-curvature direction",
                              last=x)
        x = x + alpha * p
        if block is not None:
            W.append(block)

    raise SolverError("active-set QP hit the iteration limit",
                      residual=float(np.linalg.norm(H @ x + c)), last=x)


def feasible_point(G, h, E=None, e=None):
    """Some point of ``{x : Gx <= h, Ex = e}`` via an LP; raises if empty."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n = G.shape[1] if G.size else (np.atleast_2d(E).shape[1] if E is not None else 0)
    E = _as2d(E, n)
    kwargs = {}
    if G.shape[0]:
        kwargs.update(A_ub=G, b_ub=np.asarray(h, dtype=float))
    if E.shape[0]:
        kwargs.update(A_eq=E, b_eq=np.asarray(e, dtype=float))
    if not kwargs:
        return np.zeros(n)
    res = linprog(np.zeros(n), bounds=[(None, None)] * n, method="highs",
                  options=_HIGHS_OPTS, **kwargs)
    if res.status == 2:
        raise InfeasibleError("polyhedron {x : Gx <= h} is empty")
    if res.status != 0:
        raise SolverError(f"feasibility LP failed: {res.message}")
    return res.x


def max_slack_point(G, h, tol=TAU_GEOM):
    """Find a point of ``{Gx <= h}`` maximizing the capped row slacks.

    Returns ``(x, slack, implicit)`` where ``implicit`` marks the rows that
    hold with equality on the whole set (max slack <= ``tol`` after row
    normalization).  At the optimum every non-implicit row has positive
    slack, so ``x`` lies in the relative interior.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    p, n = G.shape
    if p == 0:
        return np.zeros(n), np.zeros(0), np.zeros(0, dtype=bool)
    norms = np.linalg.norm(G, axis=1)
    zero = norms == 0
    if np.any(h[zero] < -tol):
        raise InfeasibleError("polyhedron has an inconsistent zero row")
    scale = np.where(zero, 1.0, norms)
    Gs, hs = G / scale[:, None], h / scale
    live = ~zero
    k = int(live.sum())
    if k == 0:
        return np.zeros(n), np.zeros(p), zero & (np.abs(h) <= tol)
    # variables (x, s): max sum s  s.t.  Gs x + s <= hs,  0 <= s <= 1
    A_ub = np.hstack([Gs[live], np.eye(k)])
    cost = np.concatenate([np.zeros(n), -np.ones(k)])
    bounds = [(None, None)] * n + [(0.0, 1.0)] * k
    res = linprog(cost, A_ub=A_ub, b_ub=hs[live], bounds=bounds, method="highs",
                  options=_HIGHS_OPTS)
    if res.status == 2:
        raise InfeasibleError("polyhedron {x : Gx <= h} is empty")
    if res.status != 0:
        raise SolverError(f"slack LP failed: {res.message}")
    x = res.x[:n]
    slack = np.zeros(p)
    slack[live] = hs[live] - Gs[live] @ x
    slack[zero] = h[zero]
    implicit = slack <= tol
    return x, slack, implicit
