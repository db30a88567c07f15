"""Command-line front end.

    polyadmm solve CONFIG
    polyadmm examples --which {1,2,3,all} --out DIR
    polyadmm check-svs CONFIG [--json]
    polyadmm sweep CONFIG --betas 2.5,4,8

Exit codes: 0 converged (or SVS pass), 1 SVS fail, 2 cycle detected,
3 iteration limit, 4 usage error, 5 solver error.
"""

import argparse
import csv
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import diagnostics as dg
from .admm import (AdmmConfig, XSolverConfig, fmt_float, run, sample_initial_points,
                   write_trace_csv)
from .errors import (CapabilityError, InfeasibleError, PreconditionError, SolverError,
                     UsageError)
from .problems import example1, example2, example3
from .svs import check_assumption

EXIT = {"converged": 0, "svs_fail": 1, "cycle_detected": 2, "max_iter": 3, "usage": 4,
        "solver_error": 5}
# worst outcome wins when a batch mixes terminations
_SEVERITY = ["converged", "max_iter", "cycle_detected", "solver_error"]

FIGURE_BETAS = (2.5, 4.0, 8.0)
FIGURE_RUNS = 50
FIGURE_RADIUS = np.sqrt(0.5)
FIGURE_ITERS = 60
CYCLE_BETAS = (1.0, 2.0, 5.0)


def _out_dir(arg):
    d = Path(arg or os.environ.get(cfgmod.OUT_DIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _diag_config(rc, trace_ref):
    """Diagnostics need the reference and an SVS report for beta0 and P."""
    if trace_ref is None or not rc.diagnostics.get("enabled", True):
        return None
    report = check_assumption(rc.spec, *trace_ref)
    lam_star = rc.diagnostics.get("lambda_star")
    theta = rc.diagnostics.get("theta", 0.5)
    if report.beta0_result is None:
        return dg.DiagnosticsConfig(trace_ref[0], trace_ref[1], theta, lam_star=lam_star)
    return dg.DiagnosticsConfig.from_report(report, theta, lam_star)


def cmd_solve(args):
    raw = cfgmod.load(args.config)
    rc = cfgmod.resolve(raw, args.seed, args.beta, args.max_iter, args.out)
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    diag_cfg = _diag_config(rc, rc.reference) if "diagnostics" in raw else None
    outcomes, summaries = [], []
    batch = len(rc.inits) > 1
    for i, (y0, lam0, x0) in enumerate(rc.inits):
        name = f"{Path(rc.trace_name).stem}_{i:03d}.csv" if batch else rc.trace_name
        meta = {"run": i}
        if rc.seed is not None:
            meta["seed"] = rc.seed
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                trace = run(rc.spec, rc.admm, y0, lam0, x0, rc.reference, diag_cfg)
            except (SolverError, CapabilityError) as exc:
                trace = getattr(exc, "trace", None)
                if trace is not None:
                    write_trace_csv(trace, rc.out_dir / name, meta)
                print(f"run {i}: solver error: {exc}", file=sys.stderr)
                outcomes.append("solver_error")
                summaries.append({"run": i, "termination": "solver_error", "error": str(exc)})
                continue
        write_trace_csv(trace, rc.out_dir / name, meta)
        lam_star = diag_cfg.lam_star if diag_cfg is not None else None
        summ = dg.summary(trace, rc.spec, rc.reference, lam_star)
        summ["run"] = i
        summaries.append(summ)
        outcomes.append(trace.termination)
        line = f"run {i}: {trace.termination} after {trace.iterations} iterations"
        if "final_s_k" in summ:
            line += f", s_k = {summ['final_s_k']:.3e}"
        print(line)
    report = {"config": str(args.config), "seed": rc.seed, "beta": rc.admm.beta, "runs": summaries}
    (rc.out_dir / rc.report_name).write_text(json.dumps(report, indent=2, default=_json_default))
    return EXIT[max(outcomes, key=_SEVERITY.index)]


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v)}")


# ---------------------------------------------------------------------------
# examples


def figure_runs(beta, runs=FIGURE_RUNS, seed=0, iters=FIGURE_ITERS, x_solver=None):
    """``runs`` seeded Example-1 traces from the weighted ball of radius^2 = 1/2,
    each run for exactly ``iters`` iterations."""
    prob = example1()
    rng = np.random.default_rng([seed, int(round(beta * 1000))])
    inits = sample_initial_points(rng, beta, prob.spec.A @ prob.x_bar, prob.lam_bar,
                                  FIGURE_RADIUS, runs)
    xs = x_solver or XSolverConfig("closed_form", "example1")
    cfg = AdmmConfig(beta=beta, max_iter=iters, x_solver=xs, fixed_iterations=True)
    traces = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for y0, lam0 in inits:
            traces.append(run(prob.spec, cfg, y0, lam0, reference=prob.reference))
    return traces


def mean_sk(traces):
    return np.mean([t.column("s_k") for t in traces], axis=0)


def write_figure_csv(path, betas, seed, runs=FIGURE_RUNS, iters=FIGURE_ITERS):
    series = {b: mean_sk(figure_runs(b, runs, seed, iters)) for b in betas}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"beta_{b:g}" for b in betas])
        # s_0 is undefined: scheme 3 has no x^0
        for k in range(1, iters + 1):
            w.writerow([k] + [fmt_float(series[b][k]) for b in betas])
        fh.write(f"# mean s_k over {runs} runs per beta, seed={seed}, radius^2=0.5\n")
    return series


def cycle_rows(which, beta, max_iter=100):
    prob = example2() if which == 2 else example3()
    cfg = AdmmConfig(beta=beta, max_iter=max_iter,
                     x_solver=XSolverConfig("closed_form", prob.closed_form))
    trace = run(prob.spec, cfg, [0.0], [-1.0])
    rows = []
    if trace.cycle is not None:
        # order phases by lambda so tables are independent of where detection stopped
        for s in sorted(trace.cycle.states, key=lambda s: tuple(s.lam)):
            rows.append([beta, trace.cycle.period] + list(s.x) + list(s.y) + list(s.lam))
    return trace, rows


def write_cycle_csv(path, which, betas):
    n = 2 if which == 2 else 1
    head = ["beta", "period"] + [f"x{i + 1}" for i in range(n)] + ["y", "lambda"]
    terminations = []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for b in betas:
            trace, rows = cycle_rows(which, b)
            terminations.append(trace.termination)
            for r in rows:
                w.writerow([fmt_float(r[0]), r[1]] + [fmt_float(v) for v in r[2:]])
    return terminations


def cmd_examples(args):
    out = _out_dir(args.out)
    which = ["1", "2", "3"] if args.which == "all" else [args.which]
    seed = 0 if args.seed is None else args.seed
    for w in which:
        if w == "1":
            betas = args.beta_list or FIGURE_BETAS
            iters = args.max_iter or FIGURE_ITERS
            write_figure_csv(out / "example1_mean_sk.csv", betas, seed, args.runs, iters)
            print(f"wrote {out / 'example1_mean_sk.csv'}")
        else:
            k = int(w)
            betas = args.beta_list or (CYCLE_BETAS if k == 2 else (2.0,))
            terms = write_cycle_csv(out / f"example{k}_cycle.csv", k, betas)
            print(f"wrote {out / f'example{k}_cycle.csv'} ({', '.join(terms)})")
    return 0


# ---------------------------------------------------------------------------
# check-svs and sweep


def cmd_check_svs(args):
    raw = cfgmod.load(args.config)
    rc = cfgmod.resolve(raw)
    if "reference" not in raw:
        raise UsageError("check-svs needs a 'reference' entry with x_bar and lambda_bar")
    report = check_assumption(rc.spec, *rc.reference, margin=args.margin)
    print(report.to_json() if args.json else report.to_text())
    return 0 if report.passed else EXIT["svs_fail"]


def _sweep_one(job):
    raw, beta, seed, max_iter = job
    rc = cfgmod.resolve(raw, seed=seed, beta=beta, max_iter=max_iter)
    y0, lam0, x0 = rc.inits[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            trace = run(rc.spec, rc.admm, y0, lam0, x0, rc.reference)
        except (SolverError, CapabilityError) as exc:
            return [beta, "solver_error", getattr(exc, "trace", None) and exc.trace.iterations,
                    "", ""]
    s_k = trace.column("s_k")
    hit = np.flatnonzero(s_k < 1e-8)
    rho = ""
    if trace.termination == "converged":
        try:
            rho = dg.rate_estimate(trace, rc.reference, spec=rc.spec).fitted_rho
        except (UsageError, CapabilityError):
            rho = ""
    return [beta, trace.termination, trace.iterations, int(hit[0]) if hit.size else "", rho]


def sweep(raw, betas, seed=None, max_iter=None, workers=1):
    if not betas:
        raise UsageError("beta list is empty")
    jobs = [(raw, float(b), seed, max_iter) for b in betas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    return sorted(rows, key=lambda r: r[0])


def cmd_sweep(args):
    raw = cfgmod.load(args.config)
    rows = sweep(raw, args.beta_list, args.seed, args.max_iter, args.workers)
    out = _out_dir(args.out) / args.name
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "termination", "iterations", "iters_to_sk_1e-8", "fitted_rho"])
        for r in rows:
            w.writerow([fmt_float(r[0]), r[1], r[2], r[3], "" if r[4] == "" else fmt_float(r[4])])
    for r in rows:
        print(f"beta={r[0]:g}: {r[1]} ({r[2]} iterations)")
    print(f"wrote {out}")
    return EXIT[max((r[1] for r in rows), key=_SEVERITY.index)]


# ---------------------------------------------------------------------------


def _beta_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT["usage"])


def build_parser():
    p = _Parser(prog="polyadmm", description="ADMM with polyhedral g: solve, examples, checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--max-iter", type=int, dest="max_iter")
        sp.add_argument("--out", help=f"output directory (else ${cfgmod.OUT_DIR_ENV}, else config)")

    s = sub.add_parser("solve", help="run ADMM from a config file")
    s.add_argument("config")
    overrides(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("examples", help="write the example data sets")
    e.add_argument("--which", choices=["1", "2", "3", "all"], default="all")
    e.add_argument("--betas", type=_beta_list, dest="beta_list")
    e.add_argument("--runs", type=int, default=FIGURE_RUNS)
    overrides(e)
    e.set_defaults(func=cmd_examples)

    c = sub.add_parser("check-svs", help="check the second-order condition at the reference")
    c.add_argument("config")
    c.add_argument("--json", action="store_true")
    c.add_argument("--margin", type=float, default=1e-3)
    c.set_defaults(func=cmd_check_svs)

    w = sub.add_parser("sweep", help="one run per beta, summary CSV")
    w.add_argument("config")
    w.add_argument("--betas", type=_beta_list, dest="beta_list", required=True)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--name", default="sweep.csv")
    overrides(w)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "beta", None) is not None and getattr(args, "beta_list", None) is None \
            and args.command == "examples":
        args.beta_list = [args.beta]
    try:
        return args.func(args)
    except (UsageError, PreconditionError, InfeasibleError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT["usage"]
    except (SolverError, CapabilityError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT["solver_error"]


if __name__ == "__main__":
    sys.exit(main())
