"""Polyhedral convex functions ``g(y) = max_i <a_i, y> + b_i + indicator_D(y)``.

Values, one-sided directional derivatives, subdifferentials, proximal maps
and Moreau envelopes, plus the cone and subspace objects that describe the
second-order behaviour of the envelope.
"""

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (TAU_ACT, TAU_GEOM, TAU_OPT, InfeasibleError, PreconditionError,
                     SolverError, UsageError)
from .geometry import PolyhedralCone, Polyhedron
from .qp import max_slack_point, solve_qp


@dataclass(frozen=True)
class MoreauParams:
    """Envelope parameter ``mu``; ADMM uses ``mu = 1/beta``."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise UsageError(f"mu must be positive, got {self.mu}")


def _mu(p):
    return p.mu if isinstance(p, MoreauParams) else MoreauParams(float(p)).mu


@dataclass(frozen=True, eq=False)
class MaxAffineFunction:
    """Max of affine pieces on a polyhedral domain ``{y : G y <= h}``.

    ``slopes`` is (k, m), ``offsets`` is (k,).  ``kind`` tags builtins that
    have closed-form proximal maps ("abs", "l1", "box", "affine").
    """

    slopes: np.ndarray
    offsets: np.ndarray
    G: np.ndarray = None
    h: np.ndarray = None
    kind: str = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float)).ravel()
        if a.shape[0] == 0:
            raise UsageError("need at least one affine piece")
        if b.size != a.shape[0]:
            raise UsageError("slopes and offsets disagree in length")
        m = a.shape[1]
        G = np.zeros((0, m)) if self.G is None else np.asarray(self.G, dtype=float)
        G = G.reshape(-1, m) if G.size else np.zeros((0, m))
        h = np.zeros(0) if self.h is None else np.atleast_1d(np.asarray(self.h, dtype=float))
        if h.size != G.shape[0]:
            raise UsageError("domain G and h disagree in length")
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        if G.shape[0]:
            try:
                point = max_slack_point(G, h)[0]
            except InfeasibleError as exc:
                raise InfeasibleError(f"empty domain: {exc}") from None
        else:
            point = np.zeros(m)
        object.__setattr__(self, "_domain_point", point)

    # -- builtins -------------------------------------------------------

    @classmethod
    def abs(cls):
        return cls([[1.0], [-1.0]], [0.0, 0.0], kind="abs")

    @classmethod
    def l1(cls, m):
        """``||y||_1`` on R^m as max over sign vectors (2**m pieces)."""
        signs = np.array(list(itertools.product([1.0, -1.0], repeat=m)))
        return cls(signs, np.zeros(len(signs)), kind="l1")

    @classmethod
    def box_indicator(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        m = lower.size
        G = np.vstack([np.eye(m), -np.eye(m)])
        h = np.concatenate([upper, -lower])
        return cls(np.zeros((1, m)), [0.0], G=G, h=h, kind="box",
                   params={"lower": lower, "upper": upper})

    @classmethod
    def affine(cls, a, b=0.0):
        return cls(np.atleast_2d(np.asarray(a, dtype=float)), [b], kind="affine")

    # -------------------------------------------------------------------

    @property
    def dim(self):
        return self.slopes.shape[1]

    @property
    def has_domain(self):
        return self.G.shape[0] > 0

    @cached_property
    def domain(self):
        return Polyhedron(self.dim, G=self.G, h=self.h)

    def _check(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        if y.size != self.dim:
            raise UsageError(f"expected a vector of length {self.dim}, got {y.size}")
        return y

    def _row_scale(self, y):
        return 1.0 + np.abs(self.h) + np.linalg.norm(self.G, axis=1) * np.linalg.norm(y)

    def in_domain(self, y, tol=TAU_GEOM):
        y = self._check(y)
        return not self.has_domain or bool(np.all(self.G @ y - self.h <= tol * self._row_scale(y)))

    def pieces_max(self, y):
        return float(np.max(self.slopes @ y + self.offsets))

    def __call__(self, y):
        return evaluate(self, y)

    def active_pieces(self, y, tol=TAU_ACT):
        y = self._check(y)
        vals = self.slopes @ y + self.offsets
        top = vals.max()
        return np.flatnonzero(vals >= top - tol * (1.0 + abs(top)))

    def active_rows(self, y, tol=TAU_GEOM):
        y = self._check(y)
        if not self.has_domain:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(self.G @ y - self.h >= -tol * self._row_scale(y))

    def to_config(self):
        if self.kind == "abs":
            return {"builtin": "abs"}
        if self.kind == "l1":
            return {"builtin": "l1", "dim": self.dim}
        if self.kind == "box":
            return {"builtin": "box_indicator", "lower": self.params["lower"].tolist(),
                    "upper": self.params["upper"].tolist()}
        cfg = {"pieces": [list(a) + [b] for a, b in zip(self.slopes.tolist(), self.offsets.tolist())]}
        if self.has_domain:
            cfg["domain"] = {"G": self.G.tolist(), "h": self.h.tolist()}
        return cfg

    @classmethod
    def from_config(cls, cfg):
        if "builtin" in cfg:
            name = cfg["builtin"]
            if name == "abs":
                return cls.abs()
            if name == "l1":
                return cls.l1(int(cfg["dim"]))
            if name == "box_indicator":
                return cls.box_indicator(cfg["lower"], cfg["upper"])
            raise UsageError(f"unknown builtin g: {name!r}")
        pieces = np.atleast_2d(np.asarray(cfg["pieces"], dtype=float))
        dom = cfg.get("domain")
        G = h = None
        if dom:
            G, h = dom["G"], dom["h"]
        return cls(pieces[:, :-1], pieces[:, -1], G=G, h=h)

    def __repr__(self):
        tag = f", kind={self.kind!r}" if self.kind else ""
        return (f"MaxAffineFunction(m={self.dim}, pieces={len(self.offsets)}, "
                f"domain_rows={self.G.shape[0]}{tag})")


def evaluate(g, y):
    """``g(y)``; ``inf`` outside the domain."""
    y = g._check(y)
    if not g.in_domain(y):
        return np.inf
    return g.pieces_max(y)


def _require_feasible(g, y):
    y = g._check(y)
    if not g.in_domain(y):
        raise PreconditionError("point lies outside dom g")
    return y


def directional_derivative(g, y, w):
    """One-sided derivative ``g'(y; w)``; ``inf`` if ``w`` leaves the domain."""
    y = _require_feasible(g, y)
    w = g._check(w)
    I = g.active_rows(y)
    if I.size:
        lim = TAU_GEOM * np.linalg.norm(g.G[I], axis=1) * np.linalg.norm(w)
        if np.any(g.G[I] @ w > lim):
            return np.inf
    J = g.active_pieces(y)
    return float(np.max(g.slopes[J] @ w))


def subdifferential(g, y):
    """``conv{a_j : j active} + cone{G_i : i active}`` in generator form."""
    y = _require_feasible(g, y)
    return Polyhedron.from_generators(g.slopes[g.active_pieces(y)], g.G[g.active_rows(y)],
                                      n=g.dim)


@dataclass(frozen=True)
class ProxResult:
    y: np.ndarray
    lam: np.ndarray
    value: float


def prox(g, p, w, method="auto"):
    """Moreau decomposition ``w = y + mu*lam`` with ``lam`` in ``dg(y)``.

    ``method="auto"`` uses closed forms for builtins; ``"qp"`` always solves
    the epigraph QP.
    """
    mu = _mu(p)
    w = g._check(w)
    y = None
    if method == "auto":
        if g.kind in ("abs", "l1"):
            y = np.sign(w) * np.maximum(np.abs(w) - mu, 0.0)
        elif g.kind == "box":
            y = np.clip(w, g.params["lower"], g.params["upper"])
        elif g.kind == "affine" or (len(g.offsets) == 1 and not g.has_domain):
            y = w - mu * g.slopes[0]
    elif method != "qp":
        raise UsageError(f"unknown prox method {method!r}")
    if y is None:
        y = _prox_qp(g, mu, w)
    lam = (w - y) / mu
    value = g.pieces_max(y) + float(np.dot(y - w, y - w)) / (2.0 * mu)
    return ProxResult(y, lam, value)


def _prox_qp(g, mu, w):
    # min t + |z - w|^2 / (2 mu)  s.t.  <a_i, z> + b_i <= t,  G z <= h
    m = g.dim
    H = np.zeros((m + 1, m + 1))
    H[:m, :m] = np.eye(m) / mu
    c = np.concatenate([-w / mu, [1.0]])
    k = len(g.offsets)
    rows = np.hstack([g.slopes, -np.ones((k, 1))])
    rhs = -g.offsets
    if g.has_domain:
        rows = np.vstack([rows, np.hstack([g.G, np.zeros((g.G.shape[0], 1))])])
        rhs = np.concatenate([rhs, g.h])
    z0 = w if g.in_domain(w, tol=0.0) else g._domain_point
    x0 = np.concatenate([z0, [g.pieces_max(z0)]])
    res = solve_qp(H, c, G=rows, h=rhs, x0=x0)
    if res.kkt_residual > TAU_OPT * (1.0 + np.linalg.norm(w) / mu):
        raise SolverError("prox QP did not reach optimality", residual=res.kkt_residual,
                          last=res.x[:m])
    return res.x[:m]


def moreau_value(g, p, w, method="auto"):
    return prox(g, p, w, method).value


def moreau_grad(g, p, w, method="auto"):
    """``grad M(w) = (w - prox(w)) / mu``."""
    return prox(g, p, w, method).lam


def _require_subgradient(g, y, lam):
    y = _require_feasible(g, y)
    lam = g._check(lam)
    D = subdifferential(g, y)
    if D.distance(lam) > TAU_OPT * (1.0 + np.linalg.norm(lam)):
        raise PreconditionError("lambda is not a subgradient of g at y")
    return y, lam


def tangent_cone_of_subdiff(g, y, lam):
    """Tangent cone of ``dg(y)`` at ``lam``: ``cone{a_j - lam} + cone{G_i}``."""
    y, lam = _require_subgradient(g, y, lam)
    return subdifferential(g, y).tangent_cone(lam)


def tangent_set_Tg(g, y, lam):
    """``{w : g'(y; w) = <lam, w>}`` as ``{w : (a_j - lam).w <= 0, G_i w <= 0}``."""
    y, lam = _require_subgradient(g, y, lam)
    J, I = g.active_pieces(y), g.active_rows(y)
    return PolyhedralCone.from_rows(np.vstack([g.slopes[J] - lam, g.G[I]]), g.dim)


def critical_subspace(g, y, lam):
    """Span of ``tangent_set_Tg(g, y, lam)``."""
    return tangent_set_Tg(g, y, lam).span()


def moreau_hessian_if_exists(g, p, w, method="auto"):
    """``(1/mu) * P_V`` with ``V`` parallel to ``aff dg(y)`` if the envelope is
    twice differentiable at ``w``, else ``None``."""
    mu = _mu(p)
    r = prox(g, mu, w, method)
    if not tangent_set_Tg(g, r.y, r.lam).is_subspace():
        return None
    V = subdifferential(g, r.y).direction_space()
    return V.projector / mu


def project_cone(cone, w):
    return cone.project(w)


def _signature_ok(g, mu, y, lam, w, t, J0, I0, Jp, Ip):
    r = prox(g, mu, y + mu * lam + t * w)
    J = set(g.active_pieces(r.y).tolist())
    I = set(g.active_rows(r.y).tolist())
    return Jp <= J <= J0 and Ip <= I <= I0


def lemma32_threshold(g, p, y, lam, w, rtol=1e-3, t_cap=1e6):
    """Largest step ``t`` for which the closed-form envelope gradient holds.

    Estimated as the largest ``t`` for which the active pieces/rows of
    ``prox(y + mu*lam + t*w)`` stay between the activity pattern at ``y``
    and its limit as ``t -> 0+``; found by doubling and bisection.  Returns
    ``inf`` if no change is seen up to ``t_cap``.
    """
    mu = _mu(p)
    y, lam = _require_subgradient(g, y, lam)
    w = g._check(w)
    T = tangent_cone_of_subdiff(g, y, lam)
    d = w - T.project(w)
    J0, I0 = g.active_pieces(y), g.active_rows(y)
    slopes = g.slopes[J0] @ d
    Jp = set(J0[slopes >= slopes.max() - TAU_ACT * (1.0 + np.abs(slopes).max())].tolist())
    Ip = set()
    if I0.size:
        Gd = g.G[I0] @ d
        Ip = set(I0[Gd >= -TAU_GEOM * (1.0 + np.linalg.norm(d))].tolist())
    J0, I0 = set(J0.tolist()), set(I0.tolist())
    args = (g, mu, y, lam, w)

    hi = 1.0
    while _signature_ok(*args, hi, J0, I0, Jp, Ip):
        hi *= 2.0
        if hi > t_cap:
            return np.inf
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _signature_ok(*args, mid, J0, I0, Jp, Ip):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class GradientStep:
    value: np.ndarray
    threshold: float
    valid: bool


def lemma32_gradient_step(g, p, y, lam, w, t, threshold=None):
    """``lam + (t/mu) * P_T[w]`` with ``T`` the tangent cone of ``dg(y)`` at ``lam``.

    Equals ``moreau_grad(g, mu, y + mu*lam + t*w)`` for ``t`` below the
    validity threshold; results beyond it are flagged and a warning issued.
    """
    mu = _mu(p)
    y, lam = _require_subgradient(g, y, lam)
    w = g._check(w)
    if t < 0:
        raise UsageError("t must be nonnegative")
    value = lam + (t / mu) * tangent_cone_of_subdiff(g, y, lam).project(w)
    if threshold is None:
        threshold = lemma32_threshold(g, mu, y, lam, w) if t > 0 else np.inf
    valid = t <= threshold
    if not valid:
        warnings.warn(f"t={t:g} exceeds the estimated validity threshold {threshold:g}",
                      RuntimeWarning, stacklevel=2)
    return GradientStep(value, threshold, valid)
