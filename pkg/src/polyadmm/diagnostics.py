"""Local-convergence diagnostics for ADMM traces.

Distances to the solution set use ``v = (y, lam)`` against
``{A x_bar} x {lam_star}``.  When no multiplier is supplied, ``lam_star`` is
the trace's own limit, so every distance here is an approximation to the
distance to the true (generally unknown) multiplier set.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TAU_OPT, CapabilityError, UsageError
from .polyfunc import moreau_value, subdifferential

RATE_FLOOR = 1e-13


@dataclass
class DiagnosticsConfig:
    x_bar: np.ndarray
    lam_bar: np.ndarray
    theta: float = 0.5
    beta0: Optional[float] = None
    # I - P_S, with S the critical subspace at (A x_bar, lam_bar)
    P: Optional[np.ndarray] = None
    # a sample point of the multiplier set; None means "use the trace limit"
    lam_star: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise UsageError("theta must lie in [0, 1]")
        self.x_bar = np.atleast_1d(np.asarray(self.x_bar, dtype=float))
        self.lam_bar = np.atleast_1d(np.asarray(self.lam_bar, dtype=float))
        if self.P is not None:
            self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if self.lam_star is not None:
            self.lam_star = np.atleast_1d(np.asarray(self.lam_star, dtype=float))

    @classmethod
    def from_report(cls, report, theta=0.5, lam_star=None):
        """Take ``beta0`` and ``P`` from an ``SvsReport``."""
        beta0 = report.beta0 if np.isfinite(report.beta0) else None
        return cls(report.x_bar, report.lam_bar, theta, beta0, report.projector_P, lam_star)


def reduced_lagrangian(spec, beta, x, lam):
    """``f(x) + M_g^{1/beta}(Ax + lam/beta) + delta_C(x) - |lam|^2 / (2 beta)``."""
    if not beta > 0:
        raise UsageError("beta must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if not spec.C.contains(x):
        return np.inf
    env = moreau_value(spec.g, 1.0 / beta, spec.A @ x + lam / beta)
    return spec.f(x) + env - lam @ lam / (2.0 * beta)


def descent_slack(spec, beta, cfg, state_k, state_k1, lam_star=None):
    """Right side minus left side of the one-step descent inequality.

    Nonnegative means the inequality held on this step.  The inequality is
    only promised for ``beta > beta0 / theta`` near the reference point, so a
    negative value elsewhere is a fact about the step, not a bug.
    """
    if cfg is None or cfg.x_bar is None:
        raise UsageError("descent slack needs a reference point")
    if cfg.beta0 is None or cfg.P is None:
        raise UsageError("descent slack needs beta0 and the projector P")
    lam_star = cfg.lam_star if lam_star is None else np.atleast_1d(lam_star)
    if lam_star is None:
        lam_star = cfg.lam_bar
    A, b0, th = spec.A, cfg.beta0, cfg.theta
    x_bar = cfg.x_bar
    y_bar = A @ x_bar
    dx = state_k1.x - x_bar
    APA = A.T @ cfg.P @ A
    lhs = (reduced_lagrangian(spec, b0, state_k1.x, lam_star)
           - reduced_lagrangian(spec, b0, x_bar, lam_star)
           + 0.5 * (th * beta - b0) * dx @ APA @ dx)
    sq = lambda v: float(v @ v)
    dlam = state_k1.lam - state_k.lam
    rhs = (0.5 * beta * (sq(state_k.y - y_bar) - sq(state_k1.y - y_bar))
           + (sq(state_k.lam - lam_star) - sq(state_k1.lam - lam_star)) / (2.0 * beta)
           - 0.5 * beta * sq(state_k1.y - state_k.y)
           - ((1.0 - th) * beta - b0) / (2.0 * beta ** 2) * sq(dlam))
    return float(rhs - lhs)


@dataclass(frozen=True)
class ResidualBreakdown:
    block_x: float
    block_g: float
    block_feas: float

    @property
    def total(self):
        return float(np.sqrt(self.block_x ** 2 + self.block_g ** 2 + self.block_feas ** 2))


def residual_T(spec, x_bar, u):
    """Blockwise ``dist(0, T(u))`` for the map linearized at ``x_bar``."""
    x, y, lam = (np.atleast_1d(np.asarray(v, dtype=float)) for v in u)
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    f, A = spec.f, spec.A
    lin_grad = f.gradient(x_bar) + f.hessian(x_bar) @ (x - x_bar)
    block_x = spec.C.normal_cone_dist(x, -(lin_grad + A.T @ lam))
    if spec.g.in_domain(y):
        block_g = subdifferential(spec.g, y).distance(lam)
    else:
        block_g = np.inf
    return ResidualBreakdown(float(block_x), float(block_g), float(np.linalg.norm(A @ x - y)))


def _limit_multiplier(trace, lam_star):
    if lam_star is not None:
        return np.atleast_1d(np.asarray(lam_star, dtype=float))
    return trace.states[-1].lam


def solution_distances(trace, y_bar, lam_star):
    """``dist(v^k, {y_bar} x {lam_star})`` for every state."""
    return np.array([np.sqrt(np.sum((s.y - y_bar) ** 2) + np.sum((s.lam - lam_star) ** 2))
                     for s in trace.states])


def fit_linear_rate(values, floor=RATE_FLOOR, ks=None):
    """Least-squares fit ``log v_k ~ log C + k log rho`` over entries above
    ``floor`` (restricted to iterations ``ks`` if given).  Returns
    ``(C, rho)``, with ``C`` raised so that every fitted entry satisfies
    ``v_k <= C rho^k``."""
    values = np.asarray(values, dtype=float)
    k = np.arange(values.size) if ks is None else np.asarray(ks, dtype=int)
    k = k[values[k] > floor]
    if k.size < 2:
        return np.nan, np.nan
    slope, intercept = np.polyfit(k, np.log(values[k]), 1)
    rho = float(np.exp(slope))
    C = float(max(np.exp(intercept), np.max(values[k] / rho ** k)))
    return C, rho


@dataclass
class RateReport:
    q_ratios: np.ndarray
    fitted_rho: float
    r_linear_fit: tuple
    kappa_estimate: float
    status: str = "ok"
    tail: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    approximate: bool = True

    def to_dict(self):
        return {
            "status": self.status,
            "fitted_rho": self.fitted_rho,
            "r_linear_fit": {"C": self.r_linear_fit[0], "rho": self.r_linear_fit[1]},
            "kappa_estimate": self.kappa_estimate,
            "q_ratio_max": float(np.max(self.q_ratios)) if self.q_ratios.size else None,
            "tail_length": int(self.tail.size),
            "distance_is_approximate": self.approximate,
        }


def _require_polyhedral(spec):
    if spec is not None and not spec.C.polyhedral:
        raise CapabilityError("rate diagnostics need a polyhedral constraint set")


def rate_estimate(trace, reference=None, tail_fraction=0.5, spec=None, lam_star=None,
                  floor=RATE_FLOOR, require_converged=True):
    """Q-ratios, a fitted Q-rate, an R-linear fit of ``|x^k - x_bar|`` and an
    empirical error-bound constant on the tail of a trace."""
    if not 0.0 < tail_fraction <= 1.0:
        raise UsageError("tail_fraction must lie in (0, 1]")
    if require_converged and trace.termination != "converged":
        raise UsageError(f"trace did not converge ({trace.termination})")
    _require_polyhedral(spec)
    n_states = len(trace.states)
    start = int(np.floor(n_states * (1.0 - tail_fraction)))
    idx = np.arange(start, n_states)
    if idx.size < 3:
        raise UsageError("tail too short for a rate estimate")

    last = trace.states[-1]
    if reference is not None:
        x_bar = np.atleast_1d(np.asarray(reference[0], dtype=float))
    else:
        x_bar = last.x
    y_bar = spec.A @ x_bar if spec is not None else last.y
    lam_lim = _limit_multiplier(trace, lam_star)
    approximate = lam_star is None or reference is None
    dist = solution_distances(trace, y_bar, lam_lim)

    d_tail = dist[idx]
    above = d_tail > floor
    if np.count_nonzero(above) < 2:
        return RateReport(np.zeros(0), np.nan, (np.nan, np.nan), np.nan,
                          status="below_floor", tail=idx, approximate=approximate)
    keep = idx[above]
    pairs = [(i, i + 1) for i in keep if i + 1 < n_states and dist[i + 1] > floor]
    ratios = np.array([dist[j] / dist[i] for i, j in pairs])
    _, rho = fit_linear_rate(dist, floor, keep)
    x_err = np.array([np.linalg.norm(s.x - x_bar) for s in trace.states])
    r_fit = fit_linear_rate(x_err, floor, idx)

    kappa = np.nan
    if spec is not None:
        kap = kappa_profile(trace, spec, x_bar, lam_lim, keep, floor)
        kappa = float(np.max(kap)) if kap.size else np.nan
    return RateReport(ratios, rho, r_fit, kappa, tail=idx, approximate=approximate)


def kappa_profile(trace, spec, x_bar, lam_star, indices=None, floor=RATE_FLOOR):
    """``dist(v^k, solution) / dist(0, T(u^k))`` at the given iterations
    (entries with either quantity below ``floor`` are skipped)."""
    _require_polyhedral(spec)
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    lam_star = np.atleast_1d(np.asarray(lam_star, dtype=float))
    y_bar = spec.A @ x_bar
    if indices is None:
        indices = range(1, len(trace.states))
    out = []
    for i in indices:
        s = trace.states[i]
        if not np.all(np.isfinite(s.x)):
            continue
        d = np.sqrt(np.sum((s.y - y_bar) ** 2) + np.sum((s.lam - lam_star) ** 2))
        r = residual_T(spec, x_bar, (s.x, s.y, s.lam)).total
        if d > floor and r > floor:
            out.append(d / r)
    return np.array(out)


@dataclass
class ResidualBoundCheck:
    gamma: float
    slack: np.ndarray

    @property
    def min_slack(self):
        return float(np.min(self.slack)) if self.slack.size else np.inf


def residual_bound_check(spec, trace, x_bar, start=1):
    """Compare ``dist^2(0, T(u^{k+1}))`` with
    ``2 beta^2 |A|^2 |dy|^2 + 2 gamma^2 |x - x_bar|^2 + |dlam|^2 / beta^2``,
    with ``gamma`` the largest observed ``|s| / |x - x_bar|`` where ``s`` is
    the linearization error of the gradient."""
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    f, A, beta = spec.f, spec.A, trace.beta
    grad_bar, hess_bar = f.gradient(x_bar), f.hessian(x_bar)
    normA2 = np.linalg.norm(A, 2) ** 2
    steps = list(zip(trace.states[max(start, 1) - 1:-1], trace.states[max(start, 1):]))
    gamma = 0.0
    for _, cur in steps:
        dx = np.linalg.norm(cur.x - x_bar)
        if dx > 0:
            s = grad_bar + hess_bar @ (cur.x - x_bar) - f.gradient(cur.x)
            gamma = max(gamma, np.linalg.norm(s) / dx)
    slack = []
    for prev, cur in steps:
        total = residual_T(spec, x_bar, (cur.x, cur.y, cur.lam)).total
        bound = (2 * beta ** 2 * normA2 * np.sum((cur.y - prev.y) ** 2)
                 + 2 * gamma ** 2 * np.sum((cur.x - x_bar) ** 2)
                 + np.sum((cur.lam - prev.lam) ** 2) / beta ** 2)
        slack.append(bound - total ** 2)
    return ResidualBoundCheck(float(gamma), np.array(slack))


def summary(trace, spec=None, reference=None, lam_star=None):
    """JSON-compatible per-run summary."""
    out = {"termination": trace.termination, "iterations": trace.iterations,
           "beta": trace.beta, "certified_global": trace.certified_global}
    if trace.init_subgradient_ok is not None:
        out["init_subgradient_ok"] = trace.init_subgradient_ok
        out["init_radius"] = trace.init_radius
    if trace.cycle is not None:
        out["cycle_period"] = trace.cycle.period
    s_k = trace.column("s_k")
    if np.any(np.isfinite(s_k)):
        out["final_s_k"] = float(s_k[-1])
    slack = trace.column("descent_slack")
    applicable = np.array([r.get("descent_applicable", False) for r in trace.records])
    if np.any(np.isfinite(slack[applicable])):
        out["min_descent_slack"] = float(np.nanmin(slack[applicable]))
        # negative slack means the run left the region where the inequality is promised
        out["descent_hypotheses_met"] = bool(out["min_descent_slack"] >= -TAU_OPT)
    if trace.termination == "converged":
        try:
            out["rate"] = rate_estimate(trace, reference, spec=spec, lam_star=lam_star).to_dict()
        except (UsageError, CapabilityError) as exc:
            out["rate"] = {"status": "unavailable", "reason": str(exc)}
    return out
