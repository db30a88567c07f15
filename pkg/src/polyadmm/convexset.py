"""Constraint sets C: whole space, boxes, H-polyhedra and Euclidean balls."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import TAU_GEOM, InfeasibleError, PreconditionError, UsageError
from .geometry import PolyhedralCone, Polyhedron, Subspace


def _vec(x, n):
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size != n:
        raise UsageError(f"expected a vector of length {n}, got {x.size}")
    return x


class ConvexSet:
    """Common interface; subclasses fill in the geometry."""

    n: int
    polyhedral = True

    def contains(self, x, tol=TAU_GEOM):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def tangent_cone(self, x):
        raise NotImplementedError

    def affine_hull_subspace(self):
        raise NotImplementedError

    def _require(self, x):
        x = _vec(x, self.n)
        if not self.contains(x):
            raise PreconditionError("point lies outside C")
        return x

    def normal_cone_dist(self, x, v):
        """``dist(v, N_C(x))``, computed as ``|P_T(v)|`` by Moreau's decomposition."""
        x = self._require(x)
        v = _vec(v, self.n)
        return float(np.linalg.norm(self.tangent_cone(x).project(v)))

    def normal_cone(self, x):
        return self.tangent_cone(x).polar()

    def bounding_box(self):
        """(lower, upper) bounds, infinite where unbounded."""
        return np.full(self.n, -np.inf), np.full(self.n, np.inf)


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    n: int

    def contains(self, x, tol=TAU_GEOM):
        return True

    def project(self, x):
        return _vec(x, self.n).copy()

    def tangent_cone(self, x):
        _vec(x, self.n)
        return PolyhedralCone.whole(self.n)

    def affine_hull_subspace(self):
        return Subspace.full(self.n)

    def to_config(self):
        return {"type": "whole_space", "dim": self.n}


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != up.shape:
            raise UsageError("box bounds disagree in length")
        if np.any(lo > up):
            raise InfeasibleError("box has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def n(self):
        return self.lower.size

    def contains(self, x, tol=TAU_GEOM):
        x = _vec(x, self.n)
        slack = tol * (1.0 + np.abs(x))
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def project(self, x):
        return np.clip(_vec(x, self.n), self.lower, self.upper)

    def _active(self, x):
        tol = TAU_GEOM * (1.0 + np.abs(x))
        return x >= self.upper - tol, x <= self.lower + tol

    def tangent_cone(self, x):
        x = self._require(x)
        up, lo = self._active(x)
        I = np.eye(self.n)
        rows = np.vstack([I[up], -I[lo]])
        return PolyhedralCone.from_rows(rows, self.n)

    def normal_cone_dist(self, x, v):
        x = self._require(x)
        v = _vec(v, self.n)
        up, lo = self._active(x)
        # tangent cone is a product of half-lines / lines / points
        t = v.copy()
        t[up] = np.minimum(t[up], 0.0)
        t[lo] = np.maximum(t[lo], 0.0)
        t[up & lo] = 0.0
        return float(np.linalg.norm(t))

    def affine_hull_subspace(self):
        free = self.upper > self.lower
        return Subspace(np.eye(self.n)[:, free], self.n)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def to_config(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class HPolyhedron(ConvexSet):
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if G.shape[0] != h.size:
            raise UsageError("G and h disagree in length")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        # feasibility certificate
        _ = self._poly.interior_point

    @cached_property
    def _poly(self):
        return Polyhedron(self.G.shape[1], G=self.G, h=self.h)

    @property
    def n(self):
        return self.G.shape[1]

    def contains(self, x, tol=TAU_GEOM):
        return self._poly.contains(_vec(x, self.n), tol)

    def project(self, x):
        return self._poly.project(_vec(x, self.n))

    def tangent_cone(self, x):
        x = self._require(x)
        return self._poly.tangent_cone(x, tol=TAU_GEOM)

    def affine_hull_subspace(self):
        return self._poly.direction_space()

    def bounding_box(self):
        lo, up = np.full(self.n, -np.inf), np.full(self.n, np.inf)
        for i, row in enumerate(self.G):
            nz = np.flatnonzero(row)
            if nz.size == 1:
                j = nz[0]
                bound = self.h[i] / row[j]
                if row[j] > 0:
                    up[j] = min(up[j], bound)
                else:
                    lo[j] = max(lo[j], bound)
        return lo, up

    def to_config(self):
        return {"type": "polyhedron", "G": self.G.tolist(), "h": self.h.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float
    polyhedral = False

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if not self.radius >= 0:
            raise InfeasibleError("ball radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self):
        return self.center.size

    def contains(self, x, tol=TAU_GEOM):
        x = _vec(x, self.n)
        return np.linalg.norm(x - self.center) <= self.radius + tol * (1.0 + self.radius)

    def project(self, x):
        x = _vec(x, self.n)
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / r)

    def tangent_cone(self, x):
        """Half-space at boundary points, whole space inside; exact for a ball."""
        x = self._require(x)
        if self.radius == 0:
            return PolyhedralCone.zero(self.n)
        d = x - self.center
        if np.linalg.norm(d) < self.radius * (1.0 - TAU_GEOM):
            return PolyhedralCone.whole(self.n)
        return PolyhedralCone.from_rows(d[None, :], self.n)

    def affine_hull_subspace(self):
        return Subspace.zero(self.n) if self.radius == 0 else Subspace.full(self.n)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_config(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


def from_config(cfg):
    kind = cfg.get("type")
    if kind == "whole_space":
        return WholeSpace(int(cfg["dim"]))
    if kind == "box":
        return Box(cfg["lower"], cfg["upper"])
    if kind == "polyhedron":
        return HPolyhedron(cfg["G"], cfg["h"])
    if kind == "ball":
        return Ball(cfg["center"], cfg["radius"])
    raise UsageError(f"unknown constraint set type {kind!r}")
