"""Subspaces, polyhedral cones and polyhedra in small dense dimensions."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import TAU_GEOM, TAU_LIN, TAU_OPT, UsageError
from .qp import feasible_point, max_slack_point, solve_qp


def _rows(M, n):
    if M is None:
        return None
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, n))
    M = np.atleast_2d(M)
    if M.shape[1] != n:
        raise UsageError(f"expected rows of length {n}, got shape {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^n held by an orthonormal basis (columns of Q)."""

    Q: np.ndarray
    n: int

    @classmethod
    def span(cls, vectors, n, tol=1e-10):
        """Orthonormal basis of the span of the given row vectors."""
        V = _rows(vectors, n)
        if V is None or V.shape[0] == 0:
            return cls.zero(n)
        u, s, _ = np.linalg.svd(V.T, full_matrices=False)
        if s.size == 0 or s[0] == 0:
            return cls.zero(n)
        rank = int(np.sum(s > tol * s[0]))
        return cls(u[:, :rank], n)

    @classmethod
    def null(cls, M, n, tol=1e-10):
        """Kernel of the matrix ``M`` (rows of length n)."""
        M = _rows(M, n)
        if M is None or M.shape[0] == 0:
            return cls.full(n)
        _, s, vt = np.linalg.svd(M, full_matrices=True)
        top = s[0] if s.size else 0.0
        rank = int(np.sum(s > tol * max(top, 1e-300))) if top > 0 else 0
        return cls(vt[rank:].T.copy(), n)

    @classmethod
    def full(cls, n):
        return cls(np.eye(n), n)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, 0)), n)

    @property
    def dim(self):
        return self.Q.shape[1]

    @cached_property
    def projector(self):
        return self.Q @ self.Q.T

    @cached_property
    def complement_projector(self):
        return np.eye(self.n) - self.projector

    def project(self, v):
        return self.Q @ (self.Q.T @ np.asarray(v, dtype=float))

    def contains(self, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - self.project(v)) <= tol * (1.0 + np.linalg.norm(v))

    def complement(self):
        return Subspace.null(self.Q.T, self.n) if self.dim else Subspace.full(self.n)

    def intersect(self, other):
        M = np.vstack([self.complement_projector, other.complement_projector])
        return Subspace.null(M, self.n)

    def same_as(self, other, tol=1e-9):
        return self.dim == other.dim and np.allclose(self.projector, other.projector,
                                                     atol=tol)

    def check(self):
        """Return (orthonormality error, idempotence error)."""
        I = np.eye(self.dim)
        P = self.projector
        return (float(np.abs(self.Q.T @ self.Q - I).max(initial=0.0)),
                float(np.abs(P @ P - P).max(initial=0.0)))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, n={self.n})"


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """Polyhedral convex cone.

    Held either by inequality rows ``{v : rows @ v <= 0}`` or by generators
    ``cone(generators)``; the two forms are exchanged by polarity, so each
    operation works on whichever form is present without vertex/facet
    enumeration.
    """

    n: int
    rows: np.ndarray = None
    generators: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "rows", _rows(self.rows, self.n))
        object.__setattr__(self, "generators", _rows(self.generators, self.n))
        if self.rows is None and self.generators is None:
            raise UsageError("cone needs rows or generators")

    @classmethod
    def from_rows(cls, rows, n):
        return cls(n, rows=rows)

    @classmethod
    def from_generators(cls, generators, n):
        return cls(n, generators=generators)

    @classmethod
    def whole(cls, n):
        return cls(n, rows=np.zeros((0, n)))

    @classmethod
    def zero(cls, n):
        return cls(n, generators=np.zeros((0, n)))

    def polar(self):
        return PolyhedralCone(self.n, rows=self.generators, generators=self.rows)

    def project(self, w):
        """Euclidean projection onto the cone."""
        w = np.asarray(w, dtype=float).ravel()
        if self.rows is not None:
            if self.rows.shape[0] == 0:
                return w.copy()
            res = solve_qp(np.eye(self.n), -w, G=self.rows, h=np.zeros(len(self.rows)),
                           x0=np.zeros(self.n))
            return res.x
        # Moreau: P_K(w) = w - P_{K polar}(w)
        return w - self.polar().project(w)

    def distance(self, v):
        v = np.asarray(v, dtype=float).ravel()
        return float(np.linalg.norm(v - self.project(v)))

    def contains(self, v, tol=TAU_OPT):
        v = np.asarray(v, dtype=float).ravel()
        if self.rows is not None:
            if self.rows.shape[0] == 0:
                return True
            scale = np.linalg.norm(self.rows, axis=1) * (1.0 + np.linalg.norm(v))
            return bool(np.all(self.rows @ v <= tol * scale))
        return self.distance(v) <= tol * (1.0 + np.linalg.norm(v))

    @cached_property
    def _implicit(self):
        # rows that vanish on the whole cone
        _, _, implicit = max_slack_point(self.rows, np.zeros(len(self.rows)))
        return implicit

    def span(self):
        """Smallest subspace containing the cone."""
        if self.rows is not None:
            if self.rows.shape[0] == 0:
                return Subspace.full(self.n)
            return Subspace.null(self.rows[self._implicit], self.n)
        return Subspace.span(self.generators, self.n)

    def is_subspace(self):
        if self.rows is not None:
            return self.rows.shape[0] == 0 or bool(np.all(self._implicit))
        return self.polar().is_subspace()

    def sample(self, rng, count):
        """Points of the cone: projections of standard normal draws."""
        return np.array([self.project(z) for z in rng.standard_normal((count, self.n))])

    def __repr__(self):
        form = "rows" if self.rows is not None else "generators"
        k = len(self.rows if self.rows is not None else self.generators)
        return f"PolyhedralCone(n={self.n}, {k} {form})"


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Convex polyhedron, by inequalities ``G x <= h`` or by generators.

    The generator form is ``conv(points) + cone(rays)``.  Subdifferentials of
    max-affine functions come out naturally in generator form; feasible sets
    in inequality form.
    """

    n: int
    G: np.ndarray = None
    h: np.ndarray = None
    points: np.ndarray = None
    rays: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "G", _rows(self.G, self.n))
        object.__setattr__(self, "points", _rows(self.points, self.n))
        object.__setattr__(self, "rays", _rows(self.rays, self.n))
        if self.G is not None:
            h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).ravel()
            if h.size != self.G.shape[0]:
                raise UsageError("G and h disagree in length")
            object.__setattr__(self, "h", h)
        if self.points is not None and self.rays is None:
            object.__setattr__(self, "rays", np.zeros((0, self.n)))
        if self.G is None and self.points is None:
            raise UsageError("polyhedron needs (G, h) or points")
        if self.points is not None and self.points.shape[0] == 0:
            raise UsageError("generator form needs at least one point")

    @classmethod
    def from_inequalities(cls, G, h, n=None):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return cls(n if n is not None else G.shape[1], G=G, h=h)

    @classmethod
    def from_generators(cls, points, rays=None, n=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[1] if n is None else n
        return cls(n, points=points, rays=rays)

    @property
    def has_generators(self):
        return self.points is not None

    @cached_property
    def interior_point(self):
        if self.has_generators:
            return self.points.mean(axis=0)
        return max_slack_point(self.G, self.h)[0]

    @cached_property
    def _weights_matrix(self):
        return np.vstack([self.points, self.rays])

    def project(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if self.G is not None:
            if self.G.shape[0] == 0:
                return x.copy()
            if np.all(self.G @ x <= self.h):
                return x.copy()
            res = solve_qp(np.eye(self.n), -x, G=self.G, h=self.h,
                           x0=feasible_point(self.G, self.h))
            return res.x
        M = self._weights_matrix
        k, r = len(self.points), len(self.rays)
        if k == 1 and r == 0:
            return self.points[0].copy()
        if self.n == 1:
            # an interval; exact, so interior points have distance exactly 0
            lo, hi = self.points.min(), self.points.max()
            if np.any(self.rays > 0):
                hi = np.inf
            if np.any(self.rays < 0):
                lo = -np.inf
            return np.clip(x, lo, hi)
        q = k + r
        w0 = np.zeros(q)
        w0[0] = 1.0
        E = np.concatenate([np.ones(k), np.zeros(r)])[None, :]
        res = solve_qp(M @ M.T, -M @ x, G=-np.eye(q), h=np.zeros(q), E=E, e=[1.0], x0=w0)
        return M.T @ res.x

    def distance(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=TAU_GEOM):
        x = np.asarray(x, dtype=float).ravel()
        if self.G is not None:
            if self.G.shape[0] == 0:
                return True
            scale = 1.0 + np.abs(self.h) + np.linalg.norm(self.G, axis=1) * np.linalg.norm(x)
            return bool(np.all(self.G @ x - self.h <= tol * scale))
        return self.distance(x) <= tol * (1.0 + np.linalg.norm(x))

    def direction_space(self):
        """Subspace parallel to the affine hull."""
        if self.has_generators:
            diffs = np.vstack([self.points[1:] - self.points[0], self.rays])
            return Subspace.span(diffs, self.n)
        if self.G.shape[0] == 0:
            return Subspace.full(self.n)
        _, _, implicit = max_slack_point(self.G, self.h)
        return Subspace.null(self.G[implicit], self.n)

    def tangent_cone(self, x, tol=TAU_OPT):
        """Tangent cone at a member ``x``."""
        x = np.asarray(x, dtype=float).ravel()
        if self.has_generators:
            diffs = self.points - x
            # a point that coincides with x up to rounding would add a spurious ray
            scale = 1.0 + np.linalg.norm(x) + np.abs(self.points).max()
            diffs = diffs[np.linalg.norm(diffs, axis=1) > tol * scale]
            gens = np.vstack([diffs, self.rays])
            return PolyhedralCone.from_generators(gens, self.n)
        scale = 1.0 + np.abs(self.h) + np.linalg.norm(self.G, axis=1) * np.linalg.norm(x)
        active = self.G @ x - self.h >= -tol * scale
        return PolyhedralCone.from_rows(self.G[active], self.n)

    def in_relative_interior(self, x, tol=TAU_OPT):
        """True iff the tangent cone at ``x`` is a linear subspace."""
        return self.contains(x, tol) and self.tangent_cone(x, tol).is_subspace()

    def __repr__(self):
        if self.has_generators:
            return (f"Polyhedron(n={self.n}, {len(self.points)} points, "
                    f"{len(self.rays)} rays)")
        return f"Polyhedron(n={self.n}, {len(self.G)} inequalities)"


def check_projector(P, tol=TAU_LIN):
    """Symmetric and idempotent to ``tol``."""
    return bool(np.abs(P - P.T).max(initial=0) <= tol and np.abs(P @ P - P).max(initial=0) <= tol)
