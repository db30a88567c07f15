import warnings

import numpy as np
import pytest

from polyadmm.errors import InfeasibleError, PreconditionError, UsageError
from polyadmm.geometry import PolyhedralCone
from polyadmm.polyfunc import (MaxAffineFunction, MoreauParams, critical_subspace,
                               directional_derivative, evaluate, lemma32_gradient_step,
                               moreau_grad, moreau_hessian_if_exists, moreau_value, project_cone,
                               prox, subdifferential, tangent_cone_of_subdiff, tangent_set_Tg)

from oracles import central_difference, grid_prox_2d, l1_critical_span, project_orthant_faces

ABS = MaxAffineFunction.abs()
BOX = MaxAffineFunction.box_indicator([-1.0], [1.0])


def test_eval():
    assert evaluate(ABS, [0.3]) == 0.3
    assert evaluate(ABS, [0.0]) == 0.0
    assert evaluate(BOX, [2.0]) == np.inf
    with pytest.raises(UsageError):
        evaluate(ABS, [1.0, 2.0])


def test_directional_derivative():
    assert directional_derivative(ABS, [0.0], [1.0]) == 1.0
    assert directional_derivative(ABS, [0.0], [-2.0]) == 2.0
    assert directional_derivative(BOX, [1.0], [1.0]) == np.inf
    with pytest.raises(PreconditionError):
        directional_derivative(BOX, [3.0], [1.0])


def test_subdifferential():
    D = subdifferential(ABS, [0.0])
    assert D.contains([-1.0]) and D.contains([1.0]) and D.contains([0.3])
    assert not D.contains([1.01])
    single = subdifferential(ABS, [0.5])
    assert single.contains([1.0]) and not single.contains([0.99])
    ray = subdifferential(BOX, [1.0])
    assert ray.contains([0.0]) and ray.contains([50.0]) and not ray.contains([-0.1])


def test_empty_domain_rejected():
    with pytest.raises(InfeasibleError):
        MaxAffineFunction([[0.0]], [0.0], G=[[1.0], [-1.0]], h=[-1.0, -1.0])


@pytest.mark.parametrize("method", ["auto", "qp"])
def test_prox_abs_envelope_values(method):
    r = prox(ABS, MoreauParams(0.5), [0.2], method)
    assert r.y[0] == pytest.approx(0.0, abs=1e-12)
    assert r.lam[0] == pytest.approx(0.4, abs=1e-12)
    assert r.value == pytest.approx(0.04, abs=1e-12)
    r = prox(ABS, 0.5, [1.0], method)
    assert (r.y[0], r.lam[0], r.value) == pytest.approx((0.5, 1.0, 0.75), abs=1e-12)
    r = prox(ABS, 3.7, [0.0], method)
    assert (r.y[0], r.lam[0], r.value) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)


def test_prox_box_clamps():
    r = prox(BOX, 0.3, [2.5])
    assert r.y[0] == 1.0 and r.lam[0] == pytest.approx(1.5 / 0.3)


def test_prox_random_three_piece_matches_grid():
    rng = np.random.default_rng(7)
    for _ in range(5):
        slopes = rng.normal(size=(3, 2))
        offsets = rng.normal(size=3)
        g = MaxAffineFunction(slopes, offsets)
        w = rng.normal(size=2) * 2
        r = prox(g, 0.7, w)
        ref = grid_prox_2d(slopes, offsets, 0.7, w)
        assert np.max(np.abs(r.y - ref)) <= 1e-4


def test_moreau_grad():
    assert moreau_grad(ABS, 0.5, [1.0])[0] == pytest.approx(1.0)
    assert moreau_grad(ABS, 0.5, [0.0])[0] == 0.0
    fd = central_difference(lambda s: moreau_value(ABS, 0.5, [s]), 0.2)
    assert moreau_grad(ABS, 0.5, [0.2])[0] == pytest.approx(0.4, abs=1e-12)
    assert fd == pytest.approx(0.4, abs=1e-6)


def test_tangent_cone_of_subdiff():
    inside = tangent_cone_of_subdiff(ABS, [0.0], [0.5])
    assert inside.is_subspace() and inside.contains([3.0]) and inside.contains([-3.0])
    upper = tangent_cone_of_subdiff(ABS, [0.0], [1.0])
    assert upper.contains([-2.0]) and not upper.contains([0.1])
    point = tangent_cone_of_subdiff(ABS, [0.5], [1.0])
    # tangent cone of a singleton: only 0 survives
    members = [v for v in np.linspace(-2, 2, 41) if point.contains([v])]
    assert members == [0.0]
    with pytest.raises(PreconditionError):
        tangent_cone_of_subdiff(ABS, [0.5], [0.0])


def test_tangent_set():
    zero = tangent_set_Tg(ABS, [0.0], [0.0])
    assert zero.contains([0.0]) and not zero.contains([1.0]) and not zero.contains([-1.0])
    pos = tangent_set_Tg(ABS, [0.0], [1.0])
    assert pos.contains([2.0]) and not pos.contains([-0.5])
    neg = tangent_set_Tg(ABS, [0.0], [-1.0])
    assert neg.contains([-2.0]) and not neg.contains([0.5])


def test_critical_subspace():
    assert critical_subspace(ABS, [0.0], [0.0]).dim == 0
    assert critical_subspace(ABS, [0.0], [-1.0]).dim == 1
    l1 = MaxAffineFunction.l1(2)
    S = critical_subspace(l1, [0.0, 1.0], [0.0, 1.0])
    ref = l1_critical_span([0.0, 1.0], [0.0, 1.0])
    assert S.dim == ref.shape[1] == 1
    assert np.allclose(S.projector, ref @ ref.T, atol=1e-12)
    assert np.allclose(S.projector, np.diag([0.0, 1.0]), atol=1e-12)


def test_moreau_hessian():
    assert moreau_hessian_if_exists(ABS, 0.5, [0.1])[0, 0] == pytest.approx(2.0)
    assert moreau_hessian_if_exists(ABS, 0.5, [1.0])[0, 0] == pytest.approx(0.0)
    assert moreau_hessian_if_exists(ABS, 0.5, [0.5]) is None


def test_lemma32_steps():
    step = lemma32_gradient_step(ABS, 0.5, [0.0], [0.0], [1.0], 0.1)
    assert step.valid and step.value[0] == pytest.approx(0.2, abs=1e-12)
    assert moreau_grad(ABS, 0.5, [0.1])[0] == pytest.approx(step.value[0], abs=1e-10)
    step = lemma32_gradient_step(ABS, 0.5, [0.0], [1.0], [-1.0], 0.1)
    assert step.value[0] == pytest.approx(0.8, abs=1e-12)
    assert moreau_grad(ABS, 0.5, [0.5 - 0.1])[0] == pytest.approx(0.8, abs=1e-10)
    assert lemma32_gradient_step(ABS, 0.5, [0.0], [0.3], [1.0], 0.0).value[0] == 0.3


def test_lemma32_threshold_warns():
    # from (0, 0) with mu = 0.5 the envelope leaves its quadratic branch at t = 0.5
    step = lemma32_gradient_step(ABS, 0.5, [0.0], [0.0], [1.0], 0.1)
    assert step.threshold == pytest.approx(0.5, rel=2e-3)
    with pytest.warns(RuntimeWarning):
        late = lemma32_gradient_step(ABS, 0.5, [0.0], [0.0], [1.0], 2.0)
    assert not late.valid


def test_project_cone():
    assert project_cone(PolyhedralCone.from_rows([[-1.0]], 1), [-3.0])[0] == 0.0
    assert project_cone(PolyhedralCone.zero(1), [5.0])[0] == 0.0
    rows = np.eye(2)
    got = project_cone(PolyhedralCone.from_rows(rows, 2), [1.0, -1.0])
    assert np.allclose(got, project_orthant_faces(rows, [1.0, -1.0]))
    assert np.allclose(got, [0.0, -1.0])


def test_polarity_against_conjugate():
    # g* of |.| is the indicator of [-1, 1]
    conj = MaxAffineFunction.box_indicator([-1.0], [1.0])
    for lam in (-1.0, 0.0, 1.0):
        T = tangent_cone_of_subdiff(ABS, [0.0], [lam])
        Tstar = tangent_cone_of_subdiff(conj, [lam], [0.0])
        polar = Tstar.polar()
        for v in np.linspace(-2, 2, 9):
            assert T.contains([v]) == polar.contains([v])


def test_config_roundtrip():
    g = MaxAffineFunction([[1.0, 0.0], [0.0, 1.0]], [0.0, 1.0], G=[[1.0, 1.0]], h=[3.0])
    back = MaxAffineFunction.from_config(g.to_config())
    assert np.array_equal(back.slopes, g.slopes) and np.array_equal(back.h, g.h)
    assert MaxAffineFunction.from_config({"builtin": "l1", "dim": 3}).slopes.shape == (8, 3)
    with pytest.raises(UsageError):
        MaxAffineFunction.from_config({"builtin": "huber"})


def test_mu_must_be_positive():
    with pytest.raises(UsageError):
        MoreauParams(0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(UsageError):
            prox(ABS, -1.0, [0.0])
