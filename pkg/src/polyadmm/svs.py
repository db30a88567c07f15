"""Second-order sufficiency check at a first-order pair and the penalty
threshold ``beta0``.

The test is positive definiteness of ``hess f(x_bar)`` on ``V_C ∩ S_A``, where
``S_A = {v : Av in S}`` and ``S`` is the critical subspace of ``g`` at
``(A x_bar, lam_bar)``.  ``beta0`` is the smallest penalty making
``hess f + beta0 A^T P A`` positive definite on ``V_C``, ``P = I - P_S``.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import TAU_LIN, TAU_OPT, PreconditionError, SolverError
from .geometry import Subspace, check_projector
from .polyfunc import critical_subspace, subdifferential

BETA_HI_MAX = 2.0 ** 60


@dataclass(frozen=True)
class FirstOrderResult:
    ok: bool
    residual_x: float
    residual_lambda: float

    def __iter__(self):
        return iter((self.ok, self.residual_x, self.residual_lambda))


def _point(spec, x_bar, lam_bar):
    x_bar = np.atleast_1d(np.asarray(x_bar, dtype=float))
    lam_bar = np.atleast_1d(np.asarray(lam_bar, dtype=float))
    if x_bar.size != spec.n or lam_bar.size != spec.m:
        raise PreconditionError("reference point has the wrong dimensions")
    if not spec.C.contains(x_bar):
        raise PreconditionError("x_bar lies outside C")
    if not spec.g.in_domain(spec.A @ x_bar):
        raise PreconditionError("A x_bar lies outside dom g")
    return x_bar, lam_bar


def check_first_order(spec, x_bar, lam_bar):
    """Distances of ``-grad f - A^T lam`` to ``N_C(x_bar)`` and of ``lam`` to
    ``dg(A x_bar)``."""
    x_bar, lam_bar = _point(spec, x_bar, lam_bar)
    v = -(spec.f.gradient(x_bar) + spec.A.T @ lam_bar)
    rx = spec.C.normal_cone_dist(x_bar, v)
    rl = subdifferential(spec.g, spec.A @ x_bar).distance(lam_bar)
    return FirstOrderResult(bool(rx <= TAU_OPT and rl <= TAU_OPT), float(rx), float(rl))


def critical_subspace_SA(spec, x_bar, lam_bar):
    """``{v : A v in S}`` as the kernel of ``(I - P_S) A``."""
    x_bar, lam_bar = _point(spec, x_bar, lam_bar)
    S = critical_subspace(spec.g, spec.A @ x_bar, lam_bar)
    return Subspace.null(S.complement_projector @ spec.A, spec.n)


def _restricted_min_eig(M, B):
    if B.shape[1] == 0:
        return np.inf
    R = B.T @ M @ B
    return float(np.linalg.eigvalsh(0.5 * (R + R.T))[0])


@dataclass
class Beta0Result:
    status: str  # "finite", "sentinel" or "insufficient_along_kernel"
    beta0_raw: float
    beta0: float
    margin: float
    direction: Optional[np.ndarray] = None

    @property
    def is_sentinel(self):
        return self.status == "sentinel"

    @property
    def effective(self):
        """A usable positive number: the margin stands in for ``0+``."""
        if self.status == "finite":
            return self.beta0
        if self.status == "sentinel":
            return self.margin
        return np.inf

    @property
    def recommended_beta_min(self):
        """Local convergence theory asks for ``beta > 2 beta0``."""
        return 2.0 * self.effective if self.status != "insufficient_along_kernel" else np.inf

    def describe(self):
        if self.status == "sentinel":
            return "beta0 = 0+ (any positive beta0 works); choose any beta > 0"
        if self.status == "finite":
            return f"beta0 = {self.beta0:.9g}; local convergence for beta > {2 * self.beta0:.9g}"
        return "assumption insufficient along kernel of A^T P A; no finite beta0"


def _hessian(spec, x_bar):
    try:
        H = spec.f.hessian(x_bar)
    except (ArithmeticError, ValueError) as exc:
        raise SolverError(f"Hessian unavailable at x_bar: {exc}") from exc
    if not np.all(np.isfinite(H)):
        raise SolverError("Hessian at x_bar is not finite")
    return 0.5 * (H + H.T)


def compute_beta0(spec, x_bar, lam_bar, margin=1e-3, tol=1e-6):
    """Smallest ``beta0`` with ``B_V^T (H + beta0 A^T P A) B_V`` positive
    definite, by bisection on ``[0, beta_hi]`` with ``beta_hi`` doubling from
    1, then scaled by ``1 + margin``.  An infimum of zero is reported as the
    ``0+`` sentinel."""
    x_bar, lam_bar = _point(spec, x_bar, lam_bar)
    H = _hessian(spec, x_bar)
    S = critical_subspace(spec.g, spec.A @ x_bar, lam_bar)
    P = S.complement_projector
    APA = spec.A.T @ P @ spec.A
    B = spec.C.affine_hull_subspace().Q
    lowest = lambda beta: _restricted_min_eig(H + beta * APA, B)

    if lowest(0.0) > 0:
        return Beta0Result("sentinel", 0.0, 0.0, margin)
    hi = 1.0
    while lowest(hi) <= 0:
        hi *= 2.0
        if hi > BETA_HI_MAX:
            return Beta0Result("insufficient_along_kernel", np.inf, np.inf, margin,
                               _bad_direction(H, APA, B))
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if lowest(mid) > 0:
            hi = mid
        else:
            lo = mid
    if hi <= tol:
        # infimum is zero: any positive beta0 works
        return Beta0Result("sentinel", 0.0, 0.0, margin)
    return Beta0Result("finite", hi, hi * (1.0 + margin), margin)


def _bad_direction(H, APA, B):
    """Unit direction in ``V_C ∩ ker(A^T P A)`` where ``H`` is not positive."""
    K = Subspace.null(APA @ B, B.shape[1]).Q
    BK = B @ K
    if BK.shape[1] == 0:
        # numerically the penalty was too weak everywhere; use the worst eigvec
        w, V = np.linalg.eigh(B.T @ (H + BETA_HI_MAX * APA) @ B)
        return B @ V[:, 0]
    w, V = np.linalg.eigh(BK.T @ H @ BK)
    d = BK @ V[:, 0]
    return d / np.linalg.norm(d)


@dataclass
class SvsReport:
    x_bar: np.ndarray
    lam_bar: np.ndarray
    first_order: FirstOrderResult
    S_subspace: Subspace
    S_A_subspace: Subspace
    V_C: Subspace
    intersection_basis: Subspace
    sigma: float
    vacuous: bool
    passed: bool
    projector_P: np.ndarray
    beta0_result: Optional[Beta0Result]

    @property
    def first_order_ok(self):
        return self.first_order.ok

    @property
    def beta0(self):
        return np.inf if self.beta0_result is None else self.beta0_result.effective

    @property
    def verdict(self):
        if not self.first_order.ok:
            return "fail (first-order condition)"
        if self.vacuous:
            return "pass (vacuous: V_C ∩ S_A = {0})"
        return "pass" if self.passed else f"fail (sigma = {self.sigma:.6g})"

    def to_dict(self):
        b = self.beta0_result
        return {
            "passed": self.passed,
            "verdict": self.verdict,
            "x_bar": self.x_bar.tolist(),
            "lambda_bar": self.lam_bar.tolist(),
            "first_order": {"ok": self.first_order.ok, "residual_x": self.first_order.residual_x,
                            "residual_lambda": self.first_order.residual_lambda},
            "dim_S": self.S_subspace.dim,
            "dim_S_A": self.S_A_subspace.dim,
            "dim_V_C": self.V_C.dim,
            "dim_intersection": self.intersection_basis.dim,
            "intersection_basis": self.intersection_basis.Q.T.tolist(),
            "sigma": None if self.vacuous else self.sigma,
            "vacuous": self.vacuous,
            "projector_P": self.projector_P.tolist(),
            "beta0": None if b is None else {
                "status": b.status,
                "raw": _finite_or_none(b.beta0_raw),
                "with_margin": _finite_or_none(b.beta0),
                "margin": b.margin,
                "recommended_beta_greater_than": _finite_or_none(b.recommended_beta_min),
                "direction": None if b.direction is None else b.direction.tolist(),
                "note": b.describe(),
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self):
        lines = [f"verdict: {self.verdict}",
                 f"first-order: ok={self.first_order.ok} "
                 f"residual_x={self.first_order.residual_x:.3g} "
                 f"residual_lambda={self.first_order.residual_lambda:.3g}",
                 f"dim S = {self.S_subspace.dim}, dim S_A = {self.S_A_subspace.dim}, "
                 f"dim V_C = {self.V_C.dim}, dim(V_C ∩ S_A) = {self.intersection_basis.dim}"]
        if not self.vacuous:
            lines.append(f"sigma = {self.sigma:.9g}")
        if self.beta0_result is not None:
            lines.append(self.beta0_result.describe())
        return "\n".join(lines)


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def check_assumption(spec, x_bar, lam_bar, margin=1e-3):
    """Full report; ``beta0`` is computed only when the check passes."""
    x_bar, lam_bar = _point(spec, x_bar, lam_bar)
    fo = check_first_order(spec, x_bar, lam_bar)
    y_bar = spec.A @ x_bar
    if subdifferential(spec.g, y_bar).distance(lam_bar) > TAU_OPT * (1 + np.linalg.norm(lam_bar)):
        # subspaces need lam_bar in dg(A x_bar); report without them
        n = spec.n
        empty = Subspace.zero(n)
        return SvsReport(x_bar, lam_bar, fo, Subspace.zero(spec.m), empty,
                         spec.C.affine_hull_subspace(), empty, np.nan, False, False,
                         np.eye(spec.m), None)
    S = critical_subspace(spec.g, y_bar, lam_bar)
    S_A = Subspace.null(S.complement_projector @ spec.A, spec.n)
    V_C = spec.C.affine_hull_subspace()
    inter = V_C.intersect(S_A)
    H = _hessian(spec, x_bar)
    vacuous = inter.dim == 0
    sigma = np.inf if vacuous else _restricted_min_eig(H, inter.Q)
    passed = fo.ok and (vacuous or sigma > TAU_LIN)
    P = S.complement_projector
    if not check_projector(P):
        raise SolverError("projector I - P_S is not symmetric idempotent")
    b0 = compute_beta0(spec, x_bar, lam_bar, margin) if passed else None
    return SvsReport(x_bar, lam_bar, fo, S, S_A, V_C, inter, sigma, vacuous, passed, P, b0)
