import numpy as np
import pytest

from polyadmm.admm import AdmmConfig, AdmmState, ProblemSpec, XSolverConfig, run
from polyadmm.convexset import Ball
from polyadmm.diagnostics import (DiagnosticsConfig, descent_slack, fit_linear_rate,
                                  kappa_profile, rate_estimate, reduced_lagrangian,
                                  residual_bound_check, residual_T, summary)
from polyadmm.errors import CapabilityError, UsageError
from polyadmm.polyfunc import MaxAffineFunction
from polyadmm.problems import example1, example3
from polyadmm.smoothfn import builtin
from polyadmm.svs import check_assumption


def state(k, x, y, lam):
    return AdmmState(k, np.array([x]), np.array([y]), np.array([lam]))


def ex1_diag(theta=0.5):
    p = example1()
    rep = check_assumption(p.spec, *p.reference)
    return p, DiagnosticsConfig.from_report(rep, theta)


def test_reduced_lagrangian():
    spec = example1().spec
    assert reduced_lagrangian(spec, 2.0, [0.0], [0.0]) == 0.0
    assert reduced_lagrangian(spec, 2.0, [0.1], [0.0]) == pytest.approx(0.005, abs=1e-14)
    assert reduced_lagrangian(spec, 2.0, [0.5], [0.0]) == np.inf


def test_residual_T():
    spec = example1().spec
    assert residual_T(spec, [0.0], ([0.0], [0.0], [0.0])).total == 0.0
    r = residual_T(spec, [0.0], ([0.1], [0.0], [0.0]))
    assert (r.block_x, r.block_g, r.block_feas) == pytest.approx((0.1, 0.0, 0.1))
    assert r.total == pytest.approx(np.sqrt(0.02))
    r = residual_T(spec, [0.0], ([0.0], [0.0], [0.5]))
    assert (r.block_x, r.block_g, r.block_feas) == pytest.approx((0.5, 0.0, 0.0))


def test_descent_slack_fixed_point_and_cycle():
    p, cfg = ex1_diag()
    fixed = state(0, 0.0, 0.0, 0.0)
    assert abs(descent_slack(p.spec, 4.0, cfg, fixed, fixed)) <= 1e-8
    p3 = example3()
    rep = check_assumption(p3.spec, *p3.reference)
    cfg3 = DiagnosticsConfig.from_report(rep)
    a, b = state(0, -1.0, 0.0, -1.0), state(1, 1.0, 0.0, 1.0)
    assert descent_slack(p3.spec, 2.0, cfg3, a, b) < 0
    with pytest.raises(UsageError):
        descent_slack(p.spec, 4.0, DiagnosticsConfig([0.0], [0.0]), fixed, fixed)


def test_descent_slack_along_run():
    p, cfg = ex1_diag()
    trace = run(p.spec, AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1")),
                [0.0], [0.1], diagnostics=cfg)
    slack = trace.column("descent_slack")[1:]
    assert np.all(slack >= -1e-8)


def test_fit_linear_rate_geometric():
    C, rho = fit_linear_rate(0.5 ** np.arange(30))
    assert rho == pytest.approx(0.5, abs=1e-6) and C == pytest.approx(1.0, abs=1e-6)


def test_rate_estimate_example1():
    p, cfg = ex1_diag()
    trace = run(p.spec, AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1")),
                [0.0], [0.1], reference=p.reference)
    rep = rate_estimate(trace, p.reference, spec=p.spec, lam_star=[0.0])
    assert 0 < rep.fitted_rho < 1
    assert rep.fitted_rho == pytest.approx(1 / 3, abs=1e-3)


def test_rate_estimate_below_floor_and_errors():
    p = example1()
    cfg = AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1"), max_iter=8,
                     fixed_iterations=True)
    trace = run(p.spec, cfg, [0.0], [0.0], reference=p.reference)
    assert rate_estimate(trace, p.reference, spec=p.spec, require_converged=False).status \
        == "below_floor"
    short = run(p.spec, AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1"),
                                   max_iter=1, fixed_iterations=True), [0.01], [0.0])
    with pytest.raises(UsageError):
        rate_estimate(short, p.reference, spec=p.spec, require_converged=False)
    ball = ProblemSpec(builtin("neg_half_square"), MaxAffineFunction.abs(), np.eye(1),
                       Ball([0.0], 0.25))
    with pytest.raises(CapabilityError):
        rate_estimate(trace, p.reference, spec=ball, require_converged=False)


def test_kappa_and_residual_bound():
    p = example1()
    cfg = AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1"), max_iter=60,
                     fixed_iterations=True)
    trace = run(p.spec, cfg, [0.0], [0.1], reference=p.reference)
    kap = kappa_profile(trace, p.spec, [0.0], [0.0], floor=1e-200)
    kap = kap[np.isfinite(kap)]
    assert kap.max() / kap.min() <= 2.0
    check = residual_bound_check(p.spec, trace, [0.0])
    assert check.min_slack >= -1e-8


def test_summary_keys():
    p, cfg = ex1_diag()
    trace = run(p.spec, AdmmConfig(4.0, x_solver=XSolverConfig("closed_form", "example1")),
                [0.0], [0.1], diagnostics=cfg)
    s = summary(trace, p.spec, p.reference)
    assert s["termination"] == "converged"
    assert s["min_descent_slack"] >= -1e-8


def test_theta_bounds():
    with pytest.raises(UsageError):
        DiagnosticsConfig([0.0], [0.0], theta=1.5)
