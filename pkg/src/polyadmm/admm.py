"""ADMM for ``min_{x in C} f(x) + g(Ax)`` split as ``f(x) + g(y)``, ``Ax = y``.

The default order (``scheme3``) is

    x+ = argmin_{x in C} f(x) + <lam, Ax> + beta/2 |Ax - y|^2
    y+ = prox_{g/beta}(A x+ + lam/beta)
    lam+ = lam + beta (A x+ - y+)

``scheme4`` updates y before x.  The x-subproblem may be nonconvex; three
solvers are available (registered closed forms, a certified grid search for
n <= 2, and a local projected-gradient method that is not certified global).
"""

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .convexset import Ball, Box, ConvexSet, HPolyhedron, WholeSpace
from .errors import (TAU_OPT, CapabilityError, InfeasibleError, SolverError, UsageError)
from .polyfunc import MaxAffineFunction, prox, subdifferential
from .qp import max_slack_point, solve_qp
from .smoothfn import SmoothFunction

TERMINATIONS = ("converged", "max_iter", "cycle_detected", "solver_error")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    f: SmoothFunction
    g: MaxAffineFunction
    A: np.ndarray
    C: ConvexSet

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        if A.shape != (self.g.dim, self.f.n):
            raise UsageError(f"A has shape {A.shape}, expected {(self.g.dim, self.f.n)}")
        if self.C.n != self.f.n:
            raise UsageError("C and f disagree in dimension")
        object.__setattr__(self, "witness", self._feasibility_witness())

    @property
    def n(self):
        return self.f.n

    @property
    def m(self):
        return self.g.dim

    def _feasibility_witness(self):
        """Some ``x`` in ri C with ``Ax`` in dom g; raises if none exists."""
        C, g, A = self.C, self.g, self.A
        if not g.has_domain:
            if isinstance(C, HPolyhedron):
                return max_slack_point(C.G, C.h)[0]
            if isinstance(C, Box):
                return 0.5 * (C.lower + C.upper)
            return C.project(np.zeros(self.n))
        GA = g.G @ A
        if isinstance(C, Ball):
            res = solve_qp(np.eye(self.n), -C.center, G=GA, h=g.h)
            x = res.x
            dist = np.linalg.norm(x - C.center)
            if dist < C.radius or (C.radius == 0 and dist <= 1e-12):
                return x
            raise InfeasibleError("no point of ri C maps into dom g")
        if isinstance(C, WholeSpace):
            rows_c, h_c = np.zeros((0, self.n)), np.zeros(0)
        elif isinstance(C, Box):
            rows_c = np.vstack([np.eye(self.n), -np.eye(self.n)])
            h_c = np.concatenate([C.upper, -C.lower])
        else:
            rows_c, h_c = C.G, C.h
        x, _, implicit = max_slack_point(np.vstack([rows_c, GA]), np.concatenate([h_c, g.h]))
        if len(rows_c):
            own = max_slack_point(rows_c, h_c)[2]
            if np.any(implicit[:len(rows_c)] & ~own):
                raise InfeasibleError("no point of ri C maps into dom g")
        return x


@dataclass
class XSolverConfig:
    """``kind`` in {closed_form, global_1d, projected_gradient}."""

    kind: str = "global_1d"
    key: Optional[str] = None
    grid_1d: int = 100001
    grid_2d: int = 401
    search_radius: float = 10.0
    candidates: int = 3
    max_iter: int = 5000
    tol: float = 1e-12


@dataclass
class AdmmConfig:
    beta: float
    max_iter: int = 1000
    eps_pri: float = 1e-10
    eps_dua: float = 1e-10
    variant: str = "scheme3"
    x_solver: XSolverConfig = field(default_factory=XSolverConfig)
    cycle_window: int = 4
    cycle_tol: float = 1e-10
    prox_method: str = "auto"
    # run all max_iter iterations, ignoring the residual stop
    fixed_iterations: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise UsageError("beta must be positive")
        if not (self.eps_pri > 0 and self.eps_dua > 0):
            raise UsageError("residual tolerances must be positive")
        if self.variant not in ("scheme3", "scheme4"):
            raise UsageError(f"unknown variant {self.variant!r}")
        if self.max_iter < 1 or self.cycle_window < 1:
            raise UsageError("max_iter and cycle_window must be >= 1")


@dataclass(frozen=True)
class AdmmState:
    k: int
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray

    def vector(self):
        return np.concatenate([self.x, self.y, self.lam])


@dataclass
class CycleInfo:
    period: int
    states: list

    @property
    def is_fixed_point(self):
        return self.period == 1


@dataclass
class IterateTrace:
    states: list
    records: list
    beta: float
    termination: str = "max_iter"
    cycle: Optional[CycleInfo] = None
    init_subgradient_ok: Optional[bool] = None
    init_radius: Optional[float] = None
    certified_global: bool = True
    error: Optional[str] = None
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return self.states[-1].k

    @property
    def last(self):
        return self.states[-1]

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.records])


# ---------------------------------------------------------------------------
# x-subproblem


def _subproblem(spec, beta, y, lam):
    A, f = spec.A, spec.f

    def q(x):
        r = A @ x - y
        return f(x) + lam @ (A @ x) + 0.5 * beta * r @ r

    def q_many(X):
        AX = X @ A.T
        R = AX - y
        return f.values(X) + AX @ lam + 0.5 * beta * np.sum(R * R, axis=1)

    def grad(x):
        return f.gradient(x) + A.T @ lam + beta * A.T @ (A @ x - y)

    def hess(x):
        return f.hessian(x) + beta * A.T @ A

    return q, q_many, grad, hess


def _pick(candidates, values, rtol=1e-12):
    """Global minimizer among candidates; ties go to smallest norm, then
    lexicographic order."""
    values = np.asarray(values, dtype=float)
    best = values.min()
    tied = [np.asarray(c, dtype=float) for c, v in zip(candidates, values)
            if v <= best + rtol * (1.0 + abs(best))]
    tied.sort(key=lambda c: (round(float(np.linalg.norm(c)), 12), tuple(c)))
    return tied[0]


def _require(cond, msg):
    if not cond:
        raise CapabilityError(msg)


def _scalar_box(spec):
    _require(spec.n == 1 and spec.m == 1 and isinstance(spec.C, Box),
             "closed form needs n = m = 1 and a box C")
    a = float(spec.A[0, 0])
    _require(a == 1.0, "closed form needs A = [1]")
    return float(spec.C.lower[0]), float(spec.C.upper[0])


def _closed_example1(spec, beta, y, lam):
    _require(spec.f.name == "neg_half_square", "example1 closed form needs f = -x^2/2")
    lo, up = _scalar_box(spec)
    y, lam = float(y[0]), float(lam[0])
    if beta > 1:
        return np.array([min(up, max(lo, (beta * y - lam) / (beta - 1)))])
    q = lambda x: -0.5 * x * x + lam * x + 0.5 * beta * (x - y) ** 2
    cands = [np.array([lo]), np.array([up])]
    if beta == 1 and lam - y == 0:
        cands.append(np.array([min(up, max(lo, 0.0))]))
    return _pick(cands, [q(c[0]) for c in cands])


def _closed_example2(spec, beta, y, lam):
    _require(spec.f.name == "x1_cos_x2" and isinstance(spec.C, WholeSpace)
             and np.array_equal(spec.A, [[1.0, 0.0]]),
             "example2 closed form needs f = x1 cos x2, A = [1, 0], C = R^2")
    y, lam = float(y[0]), float(lam[0])
    # for fixed c = cos x2 the x1-minimum is concave in c: compare c = +1, -1
    cands, vals = [], []
    # x2 is reported in [0, 2 pi): 0 for cos = 1, pi for cos = -1
    for c, x2 in ((1.0, 0.0), (-1.0, np.pi)):
        cands.append(np.array([y - (lam + c) / beta, x2]))
        vals.append((lam + c) * y - (lam + c) ** 2 / (2 * beta))
    return _pick(cands, vals)


def _closed_example3(spec, beta, y, lam):
    _require(spec.f.name == "neg_cube_abs", "example3 closed form needs f = -|x|^3/3")
    lo, up = _scalar_box(spec)
    y, lam = float(y[0]), float(lam[0])
    q = lambda x: -abs(x) ** 3 / 3 + lam * x + 0.5 * beta * (x - y) ** 2
    cands = [lo, up, min(up, max(lo, 0.0))]
    # x > 0: x^2 - beta x + (beta y - lam) = 0 ; x < 0: x^2 + beta x + (lam - beta y) = 0
    for sign, const in ((1.0, beta * y - lam), (-1.0, lam - beta * y)):
        disc = beta * beta - 4 * const
        if disc >= 0:
            for root in ((beta + np.sqrt(disc)) / 2, (beta - np.sqrt(disc)) / 2):
                x = sign * root
                if lo <= x <= up and sign * x > 0:
                    cands.append(x)
    return _pick([np.array([c]) for c in cands], [q(c) for c in cands])


CLOSED_FORMS = {
    "example1": _closed_example1,
    "example2": _closed_example2,
    "example3": _closed_example3,
}


def _mask_in_C(C, X):
    if isinstance(C, WholeSpace):
        return np.ones(len(X), dtype=bool)
    if isinstance(C, Box):
        return np.all((X >= C.lower) & (X <= C.upper), axis=1)
    if isinstance(C, HPolyhedron):
        return np.all(X @ C.G.T <= C.h + 1e-12, axis=1)
    if isinstance(C, Ball):
        return np.linalg.norm(X - C.center, axis=1) <= C.radius
    return np.array([C.contains(x) for x in X])


def _polish(C, q, grad, hess, x, max_iter=200, tol=1e-15):
    """Projected Newton for boxes/whole space, projected gradient otherwise."""
    lo, up = C.bounding_box()
    boxlike = isinstance(C, (Box, WholeSpace))
    for _ in range(max_iter):
        g = grad(x)
        if boxlike:
            at_lo = (x <= lo) & (g > 0)
            at_up = (x >= up) & (g < 0)
            free = ~(at_lo | at_up)
            if not np.any(free):
                break
            d = np.zeros_like(x)
            Hf = hess(x)[np.ix_(free, free)]
            try:
                if np.linalg.eigvalsh(0.5 * (Hf + Hf.T)).min() <= 0:
                    raise np.linalg.LinAlgError
                d[free] = -np.linalg.solve(Hf, g[free])
            except np.linalg.LinAlgError:
                d[free] = -g[free]
            proj = lambda z: np.clip(z, lo, up)
        else:
            d = -g
            proj = C.project
        qx, step = q(x), 1.0
        for _ in range(60):
            xn = proj(x + step * d)
            if q(xn) <= qx + 1e-4 * g @ (xn - x):
                break
            step *= 0.5
        else:
            break
        if np.linalg.norm(xn - x) <= tol * (1.0 + np.linalg.norm(x)):
            x = xn
            break
        x = xn
    return x


def _grid_search(spec, cfg, q, q_many, grad, hess):
    n, C = spec.n, spec.C
    _require(n <= 2, "global_1d handles n <= 2 only")
    lo, up = C.bounding_box()
    R = cfg.search_radius
    lo = np.where(np.isfinite(lo), lo, -R)
    up = np.where(np.isfinite(up), up, R)
    pts = cfg.grid_1d if n == 1 else cfg.grid_2d
    axes = [np.linspace(l, u, pts) for l, u in zip(lo, up)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    X = X[_mask_in_C(C, X)]
    if len(X) == 0:
        X = C.project(0.5 * (lo + up))[None, :]
    vals = q_many(X)
    order = np.argsort(vals, kind="stable")
    spacing = np.max((up - lo) / max(pts - 1, 1))
    starts = []
    for i in order:
        if all(np.max(np.abs(X[i] - s)) > 2 * spacing for s in starts):
            starts.append(X[i])
        if len(starts) >= cfg.candidates:
            break
    cands = []
    for s in starts:
        x = _polish(C, q, grad, hess, s.copy())
        # flat directions stall the polish just short of a bound
        near = 1e-6 * np.maximum(up - lo, 1.0)
        snapped = np.where(np.abs(x - lo) <= near, lo, np.where(np.abs(up - x) <= near, up, x))
        if _mask_in_C(C, snapped[None, :])[0]:
            cands.append(snapped)
        cands.append(x)
    merged = []
    for x in cands:
        for i, other in enumerate(merged):
            if np.max(np.abs(x - other)) <= 1e-6:
                qo = q(other)
                if q(x) < qo - 1e-14 * (1.0 + abs(qo)):
                    merged[i] = x
                break
        else:
            merged.append(x)
    return _pick(merged, [q(x) for x in merged])


def _projected_gradient(spec, cfg, q, grad, x0):
    C = spec.C
    x = C.project(x0)
    L = 1.0
    for _ in range(cfg.max_iter):
        g = grad(x)
        if np.linalg.norm(x - C.project(x - g)) <= cfg.tol * (1.0 + np.linalg.norm(g)):
            return x
        while True:
            xn = C.project(x - g / L)
            # local Lipschitz test on the gradient; value-based tests stall at roundoff
            if np.linalg.norm(grad(xn) - g) <= L * np.linalg.norm(xn - x):
                break
            L *= 2.0
            if L > 1e20:
                raise SolverError("projected gradient line search failed", last=x)
        x = xn
        L = max(L / 2.0, 1e-8)
    raise SolverError("projected gradient did not converge",
                      residual=float(np.linalg.norm(x - C.project(x - grad(x)))), last=x)


def x_update(spec, cfg, y, lam, x_prev=None):
    """Minimizer of the x-subproblem with the configured solver."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    xs = cfg.x_solver
    if xs.kind == "closed_form":
        try:
            solver = CLOSED_FORMS[xs.key]
        except KeyError:
            raise CapabilityError(f"no closed form registered as {xs.key!r}") from None
        return solver(spec, cfg.beta, y, lam)
    q, q_many, grad, hess = _subproblem(spec, cfg.beta, y, lam)
    if xs.kind == "global_1d":
        return _grid_search(spec, xs, q, q_many, grad, hess)
    if xs.kind == "projected_gradient":
        x0 = np.zeros(spec.n) if x_prev is None or not np.all(np.isfinite(x_prev)) else x_prev
        return _projected_gradient(spec, xs, q, grad, x0)
    raise CapabilityError(f"unknown x-solver {xs.kind!r}")


def y_update(spec, cfg, x, lam):
    """``prox_{g/beta}(Ax + lam/beta)``; returns ``(y, grad of the envelope)``."""
    r = prox(spec.g, 1.0 / cfg.beta, spec.A @ x + lam / cfg.beta, method=cfg.prox_method)
    return r.y, r.lam


def lambda_update(cfg, lam, Ax, y):
    return lam + cfg.beta * (Ax - y)


def detect_cycle(states, window, tol):
    """Smallest period ``p <= window`` with the last ``p`` states repeating the
    ``p`` before them to ``tol`` in sup norm; ``None`` if none.

    A period ``p > 1`` also needs the states inside one period to be spread
    far more than the repeat error, so a sign-alternating sequence that is
    merely converging below ``tol`` is not mistaken for a cycle.
    """
    states = [s for s in states if np.all(np.isfinite(s.x))]
    if len(states) < 2 * window:
        return None
    vecs = [s.vector() for s in states]
    for p in range(1, window + 1):
        err = max(np.max(np.abs(vecs[-i] - vecs[-i - p])) for i in range(1, p + 1))
        if err > tol:
            continue
        if p == 1:
            return CycleInfo(1, states[-1:])
        spread = max(np.max(np.abs(vecs[-i] - vecs[-1])) for i in range(2, p + 1))
        if spread > tol and err <= 1e-2 * spread:
            return CycleInfo(p, states[-p:])
    return None


def sample_initial_points(rng, beta, y_bar, lam_bar, radius, count):
    """Uniform draws of ``(y0, lam0)`` with
    ``beta^2 |y0 - y_bar|^2 + |lam0 - lam_bar|^2 <= radius^2``, by rejection
    from the bounding box."""
    if not radius > 0:
        raise UsageError("random init radius must be positive")
    y_bar = np.atleast_1d(np.asarray(y_bar, dtype=float))
    lam_bar = np.atleast_1d(np.asarray(lam_bar, dtype=float))
    m = y_bar.size
    out = []
    while len(out) < count:
        u = rng.uniform(-1.0, 1.0, size=2 * m)
        if u @ u <= 1.0:
            out.append((y_bar + radius * u[:m] / beta, lam_bar + radius * u[m:]))
    return out


def run(spec, cfg, y0, lam0, x0=None, reference=None, diagnostics=None):
    """Iterate ADMM from ``(y0, lam0)``.

    ``reference = (x_bar, lam_bar)`` enables ``s_k``, the Lyapunov value and
    the initialization checks; ``diagnostics`` (a ``DiagnosticsConfig``) adds
    the descent-inequality slack and residual-map blocks.  Solver failures
    set ``termination = "solver_error"`` and re-raise with ``exc.trace``.
    """
    beta = cfg.beta
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    lam = np.atleast_1d(np.asarray(lam0, dtype=float)).copy()
    if y.size != spec.m or lam.size != spec.m:
        raise UsageError("y0 and lambda0 must have length m")
    if x0 is None:
        x = np.full(spec.n, np.nan) if cfg.variant == "scheme3" else spec.C.project(np.zeros(spec.n))
    else:
        x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    trace = IterateTrace([AdmmState(0, x, y, lam)], [], beta)
    trace.certified_global = cfg.x_solver.kind != "projected_gradient"

    if diagnostics is not None and reference is None:
        reference = (diagnostics.x_bar, diagnostics.lam_bar)
    if reference is not None:
        x_bar = np.atleast_1d(np.asarray(reference[0], dtype=float))
        lam_bar = np.atleast_1d(np.asarray(reference[1], dtype=float))
        y_bar = spec.A @ x_bar
        lam_star = lam_bar
        if diagnostics is not None and diagnostics.lam_star is not None:
            lam_star = np.atleast_1d(np.asarray(diagnostics.lam_star, dtype=float))
        D = subdifferential(spec.g, y) if spec.g.in_domain(y) else None
        trace.init_subgradient_ok = bool(D is not None and D.distance(lam) <= TAU_OPT * (1 + np.linalg.norm(lam)))
        if not trace.init_subgradient_ok:
            warnings.warn("lambda0 is not a subgradient of g at y0; local theory does not apply",
                          RuntimeWarning, stacklevel=2)
        trace.init_radius = float(np.sqrt(beta ** 2 * np.sum((y - y_bar) ** 2)
                                          + np.sum((lam - lam_bar) ** 2)))

    def record(prev, cur):
        rec = {}
        if prev is not None:
            rec["r_pri"] = float(np.linalg.norm(spec.A @ cur.x - cur.y))
            rec["r_dua"] = float(beta * np.linalg.norm(spec.A.T @ (cur.y - prev.y)))
        if reference is not None:
            rec["s_k"] = float(np.linalg.norm(cur.x - x_bar) + np.linalg.norm(cur.y - y_bar)
                               + np.linalg.norm(cur.lam - lam_bar))
            rec["lyapunov"] = float(0.5 * beta * np.sum((cur.y - y_bar) ** 2)
                                    + np.sum((cur.lam - lam_star) ** 2) / (2 * beta))
        if diagnostics is not None and prev is not None:
            if diagnostics.beta0 is not None and diagnostics.P is not None:
                rec["descent_slack"] = diag.descent_slack(spec, beta, diagnostics, prev, cur)
                # the inequality presumes lam^k in dg(y^k); false only for a bad init
                rec["descent_applicable"] = bool(
                    spec.g.in_domain(prev.y) and subdifferential(spec.g, prev.y).distance(prev.lam)
                    <= TAU_OPT * (1 + np.linalg.norm(prev.lam)))
            if spec.C.contains(cur.x):
                rb = diag.residual_T(spec, x_bar, (cur.x, cur.y, cur.lam))
                rec.update(T_x=rb.block_x, T_g=rb.block_g, T_feas=rb.block_feas,
                           T_total=rb.total)
        return rec

    trace.records.append(record(None, trace.states[0]))
    try:
        for k in range(cfg.max_iter):
            prev = trace.states[-1]
            if cfg.variant == "scheme3":
                x = x_update(spec, cfg, prev.y, prev.lam, prev.x)
                Ax = spec.A @ x
                y, _ = y_update(spec, cfg, x, prev.lam)
            else:
                y, _ = y_update(spec, cfg, prev.x, prev.lam)
                x = x_update(spec, cfg, y, prev.lam, prev.x)
                Ax = spec.A @ x
            lam = lambda_update(cfg, prev.lam, Ax, y)
            cur = AdmmState(k + 1, x, y, lam)
            trace.states.append(cur)
            rec = record(prev, cur)
            trace.records.append(rec)
            if (not cfg.fixed_iterations and rec["r_pri"] <= cfg.eps_pri
                    and rec["r_dua"] <= cfg.eps_dua):
                trace.termination = "converged"
                break
            cyc = detect_cycle(trace.states[-2 * cfg.cycle_window:], cfg.cycle_window,
                               cfg.cycle_tol)
            if cyc is not None and not cyc.is_fixed_point:
                trace.termination = "cycle_detected"
                trace.cycle = cyc
                break
        else:
            trace.termination = "max_iter"
    except (SolverError, CapabilityError) as exc:
        trace.termination = "solver_error"
        trace.error = str(exc)
        exc.trace = trace
        raise
    return trace


# ---------------------------------------------------------------------------
# CSV export

BASE_COLUMNS = ("r_pri", "r_dua", "s_k", "lyapunov", "descent_slack")
EXTRA_COLUMNS = ("T_x", "T_g", "T_feas", "T_total")


def fmt_float(v):
    # adding 0.0 folds -0.0 into 0.0
    return format(float(v) + 0.0, ".17g")


def trace_header(n, m, extra=True):
    head = ["k"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(m)]
    head += [f"lambda{i + 1}" for i in range(m)] + list(BASE_COLUMNS)
    if extra:
        head += list(EXTRA_COLUMNS)
    return head


def write_trace_csv(trace, out, meta=None):
    """Write one row per iterate; metadata goes on a trailing ``#`` line."""
    s0 = trace.states[0]
    n, m = s0.x.size, s0.y.size
    extra = any("T_total" in r for r in trace.records)
    own = isinstance(out, (str, bytes)) or hasattr(out, "__fspath__")
    fh = open(out, "w", newline="") if own else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(n, m, extra))
        cols = BASE_COLUMNS + (EXTRA_COLUMNS if extra else ())
        for s, r in zip(trace.states, trace.records):
            w.writerow([s.k] + [fmt_float(v) for v in np.concatenate([s.x, s.y, s.lam])]
                       + [fmt_float(r.get(c, np.nan)) for c in cols])
        info = {"termination": trace.termination, "iterations": trace.iterations,
                "beta": fmt_float(trace.beta)}
        if trace.cycle is not None:
            info["period"] = trace.cycle.period
        info.update(trace.meta)
        info.update(meta or {})
        fh.write("# " + " ".join(f"{k}={v}" for k, v in info.items()) + "\n")
    finally:
        if own:
            fh.close()


def trace_to_csv_string(trace, meta=None):
    buf = io.StringIO()
    write_trace_csv(trace, buf, meta)
    return buf.getvalue()
