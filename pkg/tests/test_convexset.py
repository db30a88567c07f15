import numpy as np
import pytest

from polyadmm.convexset import Ball, Box, HPolyhedron, WholeSpace, from_config
from polyadmm.errors import InfeasibleError, PreconditionError, UsageError


def test_project():
    assert Box([-0.25], [0.25]).project([0.4])[0] == 0.25
    assert np.array_equal(WholeSpace(2).project([3.0, -1.0]), [3.0, -1.0])
    assert np.allclose(Ball([0.0, 0.0], 1.0).project([3.0, 4.0]), [0.6, 0.8])
    P = HPolyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    assert np.allclose(P.project([1.0, 1.0]), [0.5, 0.5])


def test_normal_cone_dist():
    box = Box([-0.25], [0.25])
    assert box.normal_cone_dist([0.0], [0.0]) == 0.0
    assert box.normal_cone_dist([0.0], [1.0]) == 1.0
    assert Box([-1.0], [1.0]).normal_cone_dist([1.0], [2.0]) == 0.0
    assert Box([-1.0], [1.0]).normal_cone_dist([1.0], [-2.0]) == 2.0
    with pytest.raises(PreconditionError):
        box.normal_cone_dist([1.0], [0.0])


def test_normal_cone_dist_polyhedron_and_ball():
    P = HPolyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    assert P.normal_cone_dist([1.0, 0.0], [1.0, -0.5]) == pytest.approx(0.0, abs=1e-9)
    assert P.normal_cone_dist([0.5, 0.25], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-9)
    ball = Ball([0.0, 0.0], 1.0)
    assert ball.normal_cone_dist([1.0, 0.0], [3.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert ball.normal_cone_dist([1.0, 0.0], [0.0, 2.0]) == pytest.approx(2.0)


def test_tangent_cone():
    T = Box([-1.0], [1.0]).tangent_cone([1.0])
    assert T.contains([-3.0]) and not T.contains([0.5])
    W = WholeSpace(2).tangent_cone([5.0, 5.0])
    assert W.contains([1e6, -1e6])
    P = HPolyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    T = P.tangent_cone([1.0, 0.0])
    # active rows: x1 + x2 <= 1 and -x2 <= 0
    assert T.contains([-1.0, 0.5]) and T.contains([-1.0, 1.0])
    assert not T.contains([0.1, 0.0]) and not T.contains([0.0, -0.1])


def test_affine_hull():
    assert Box([-0.25], [0.25]).affine_hull_subspace().dim == 1
    pinned = Box([-1.0, 0.0], [1.0, 0.0]).affine_hull_subspace()
    assert pinned.same_as(type(pinned)(np.array([[1.0], [0.0]]), 2))
    flat = HPolyhedron([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0]).affine_hull_subspace()
    assert flat.dim == 1 and np.allclose(flat.projector, np.diag([0.0, 1.0]))
    assert Ball([0.0], 0.0).affine_hull_subspace().dim == 0


def test_construction_errors():
    with pytest.raises(InfeasibleError):
        Box([1.0], [0.0])
    with pytest.raises(InfeasibleError):
        HPolyhedron([[1.0], [-1.0]], [-1.0, -1.0])
    with pytest.raises(InfeasibleError):
        Ball([0.0], -1.0)
    with pytest.raises(UsageError):
        from_config({"type": "simplex"})


def test_config_roundtrip():
    for C in (WholeSpace(2), Box([-1.0], [2.0]), Ball([1.0, 1.0], 0.5),
              HPolyhedron([[1.0, 1.0]], [1.0])):
        back = from_config(C.to_config())
        x = np.full(C.n, 3.0)
        assert np.allclose(back.project(x), C.project(x))
