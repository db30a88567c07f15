import numpy as np
import pytest

from polyadmm.errors import InfeasibleError
from polyadmm.geometry import Polyhedron, PolyhedralCone, Subspace, check_projector
from polyadmm.qp import feasible_point, max_slack_point, solve_qp

from oracles import project_orthant_faces


def test_qp_box_projection():
    res = solve_qp(np.eye(2), -np.array([2.0, -3.0]), G=np.vstack([np.eye(2), -np.eye(2)]),
                   h=np.ones(4))
    assert np.allclose(res.x, [1.0, -1.0])
    assert res.kkt_residual < 1e-10


def test_qp_equality_and_semidefinite():
    # min t s.t. t >= z, t >= -z, z = 0.3
    res = solve_qp(np.zeros((2, 2)), [0.0, 1.0], G=[[1.0, -1.0], [-1.0, -1.0]], h=[0, 0],
                   E=[[1.0, 0.0]], e=[0.3])
    assert np.allclose(res.x, [0.3, 0.3])


def test_qp_infeasible():
    with pytest.raises(InfeasibleError):
        feasible_point(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))


def test_max_slack_detects_implicit_rows():
    G = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    _, _, implicit = max_slack_point(G, np.array([0.0, 0.0, 1.0]))
    assert list(implicit) == [True, True, False]


def test_random_cone_projection_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(20):
        rows = rng.normal(size=(3, 3))
        w = rng.normal(size=3)
        got = PolyhedralCone.from_rows(rows, 3).project(w)
        assert np.allclose(got, project_orthant_faces(rows, w), atol=1e-9)


def test_generator_cone_projection_via_polar():
    cone = PolyhedralCone.from_generators([[1.0, 0.0], [1.0, 1.0]], 2)
    assert np.allclose(cone.project([-1.0, 2.0]), [0.5, 0.5])
    assert np.allclose(cone.project([2.0, 0.5]), [2.0, 0.5])


def test_subspace_ops():
    S = Subspace.span([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]], 3)
    assert S.dim == 1
    assert max(S.check()) < 1e-12
    assert check_projector(S.projector)
    T = Subspace.null([[0.0, 0.0, 1.0]], 3)
    assert T.dim == 2 and S.intersect(T).same_as(S)
    assert S.complement().dim == 2


def test_polyhedron_generator_interval_is_exact():
    I = Polyhedron.from_generators([[-1.0], [1.0]])
    assert I.distance([0.3]) == 0.0
    assert I.distance([1.5]) == 0.5
    ray = Polyhedron.from_generators([[0.0]], rays=[[1.0]])
    assert ray.distance([7.0]) == 0.0 and ray.distance([-2.0]) == 2.0


def test_polyhedron_forms_agree():
    H = Polyhedron.from_inequalities([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    V = Polyhedron.from_generators([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rng = np.random.default_rng(0)
    for x in rng.uniform(-0.5, 1.5, size=(40, 2)):
        assert H.contains(x) == V.contains(x)
        assert np.allclose(H.project(x), V.project(x), atol=1e-8)
