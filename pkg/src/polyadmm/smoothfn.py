"""Smooth, possibly nonconvex, terms f with value/gradient/Hessian oracles."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UsageError

_EPS_CBRT = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class SmoothFunction:
    """``f`` on R^n.  Without ``hess`` the Hessian falls back to central
    differences of the gradient with step ``eps^(1/3) * (1 + |x|)``."""

    n: int
    value: Callable
    grad: Callable
    hess: Optional[Callable] = None
    name: str = "custom"
    config: Optional[dict] = None
    batch: Optional[Callable] = None

    def __call__(self, x):
        return float(self.value(self._check(x)))

    def _check(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        if x.size != self.n:
            raise UsageError(f"f expects a vector of length {self.n}, got {x.size}")
        return x

    def values(self, X):
        """``f`` at each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.batch is not None:
            return np.asarray(self.batch(X), dtype=float)
        return np.array([self.value(x) for x in X])

    def gradient(self, x):
        return np.atleast_1d(np.asarray(self.grad(self._check(x)), dtype=float))

    def hessian(self, x):
        x = self._check(x)
        if self.hess is not None:
            return np.atleast_2d(np.asarray(self.hess(x), dtype=float))
        return fd_hessian(self.grad, x)

    def to_config(self):
        if self.config is None:
            raise UsageError("custom smooth functions have no config form")
        return self.config


def fd_hessian(grad, x):
    step = _EPS_CBRT * (1.0 + np.linalg.norm(x))
    n = x.size
    Hm = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        Hm[:, i] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * step)
    return 0.5 * (Hm + Hm.T)


def fd_gradient(value, x):
    step = _EPS_CBRT * (1.0 + np.linalg.norm(x))
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        out[i] = (value(x + e) - value(x - e)) / (2 * step)
    return out


def neg_half_square(n=1):
    """``-|x|^2 / 2``."""
    return SmoothFunction(
        n, lambda x: -0.5 * x @ x, lambda x: -x, lambda x: -np.eye(n),
        name="neg_half_square", config={"type": "builtin", "name": "neg_half_square",
                                        "params": {"n": n}},
        batch=lambda X: -0.5 * np.sum(X * X, axis=1))


def x1_cos_x2():
    """``x1 * cos(x2)`` on R^2."""
    def hess(x):
        s, c = np.sin(x[1]), np.cos(x[1])
        return np.array([[0.0, -s], [-s, -x[0] * c]])
    return SmoothFunction(
        2, lambda x: x[0] * np.cos(x[1]),
        lambda x: np.array([np.cos(x[1]), -x[0] * np.sin(x[1])]), hess,
        name="x1_cos_x2", config={"type": "builtin", "name": "x1_cos_x2", "params": {}},
        batch=lambda X: X[:, 0] * np.cos(X[:, 1]))


def neg_cube_abs(n=1):
    """``-sum |x_i|^3 / 3``; Hessian ``-2 diag|x|`` is continuous."""
    return SmoothFunction(
        n, lambda x: -np.sum(np.abs(x) ** 3) / 3.0, lambda x: -np.abs(x) * x,
        lambda x: np.diag(-2.0 * np.abs(x)),
        name="neg_cube_abs", config={"type": "builtin", "name": "neg_cube_abs",
                                     "params": {"n": n}},
        batch=lambda X: -np.sum(np.abs(X) ** 3, axis=1) / 3.0)


def quadratic(Q, c=None):
    """``x^T Q x / 2 + c^T x`` with ``Q`` symmetrized."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Q = 0.5 * (Q + Q.T)
    n = Q.shape[0]
    c = np.zeros(n) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
    return SmoothFunction(
        n, lambda x: 0.5 * x @ Q @ x + c @ x, lambda x: Q @ x + c, lambda x: Q,
        name="quadratic", config={"type": "quadratic", "Q": Q.tolist(), "c": c.tolist()},
        batch=lambda X: 0.5 * np.einsum("ij,jk,ik->i", X, Q, X) + X @ c)


_BUILTINS = {
    "neg_half_square": neg_half_square,
    "x1_cos_x2": x1_cos_x2,
    "neg_cube_abs": neg_cube_abs,
}


def builtin(name, params=None):
    try:
        make = _BUILTINS[name]
    except KeyError:
        raise UsageError(f"unknown smooth function {name!r}") from None
    return make(**(params or {}))


def from_config(cfg):
    kind = cfg.get("type")
    if kind == "builtin":
        return builtin(cfg["name"], cfg.get("params"))
    if kind == "quadratic":
        return quadratic(cfg["Q"], cfg.get("c"))
    raise UsageError(f"unknown smooth function type {kind!r}")
