"""The three small test problems used throughout: a locally linearly
convergent one, and two on which ADMM cycles."""

from dataclasses import dataclass

import numpy as np

from .admm import ProblemSpec
from .convexset import Box, WholeSpace
from .polyfunc import MaxAffineFunction
from .smoothfn import neg_cube_abs, neg_half_square, x1_cos_x2


@dataclass(frozen=True, eq=False)
class NamedProblem:
    name: str
    spec: ProblemSpec
    x_bar: np.ndarray
    lam_bar: np.ndarray
    closed_form: str

    @property
    def reference(self):
        return self.x_bar, self.lam_bar


def example1():
    """``min_{|x| <= 1/4} -x^2/2 + |x|``; converges linearly for beta > 2."""
    spec = ProblemSpec(neg_half_square(), MaxAffineFunction.abs(), np.eye(1), Box(-0.25, 0.25))
    return NamedProblem("example1", spec, np.zeros(1), np.zeros(1), "example1")


def example2():
    """``min_{x in R^2} x1 cos x2 + |x1|``; cycles from ``(y, lam) = (0, -1)``."""
    spec = ProblemSpec(x1_cos_x2(), MaxAffineFunction.abs(), np.array([[1.0, 0.0]]),
                       WholeSpace(2))
    return NamedProblem("example2", spec, np.zeros(2), np.array([-1.0]), "example2")


def example3():
    """``min_{|x| <= 1} -|x|^3/3 + |x|``; cycles at beta = 2 from ``(0, -1)``."""
    spec = ProblemSpec(neg_cube_abs(), MaxAffineFunction.abs(), np.eye(1), Box(-1.0, 1.0))
    return NamedProblem("example3", spec, np.zeros(1), np.zeros(1), "example3")


EXAMPLES = {"1": example1, "2": example2, "3": example3}
