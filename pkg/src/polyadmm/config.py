"""Run configuration: JSON files validated against a schema, then turned into
problem objects and dataclass configs."""

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import convexset, smoothfn
from .admm import AdmmConfig, ProblemSpec, XSolverConfig
from .errors import UsageError
from .polyfunc import MaxAffineFunction
from .problems import EXAMPLES

OUT_DIR_ENV = "POLYADMM_OUT_DIR"

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["problem", "admm"],
    "additionalProperties": False,
    "properties": {
        "problem": {
            "oneOf": [
                {"type": "string"},
                {"type": "object", "required": ["example"], "additionalProperties": False,
                 "properties": {"example": {"enum": ["1", "2", "3"]}}},
                {"type": "object", "required": ["f", "g", "A", "C"], "additionalProperties": False,
                 "properties": {
                     "f": {"type": "object", "required": ["type"],
                           "properties": {"type": {"enum": ["builtin", "quadratic"]},
                                          "name": {"type": "string"},
                                          "params": {"type": "object"},
                                          "Q": _matrix, "c": _vector}},
                     "g": {"type": "object",
                           "properties": {"builtin": {"enum": ["abs", "l1", "box_indicator"]},
                                          "dim": {"type": "integer", "minimum": 1},
                                          "lower": _vector, "upper": _vector,
                                          "pieces": _matrix,
                                          "domain": {"type": "object", "required": ["G", "h"],
                                                     "properties": {"G": _matrix, "h": _vector}}}},
                     "A": _matrix,
                     "C": {"type": "object", "required": ["type"],
                           "properties": {"type": {"enum": ["whole_space", "box", "polyhedron",
                                                            "ball"]},
                                          "dim": {"type": "integer", "minimum": 1},
                                          "lower": _vector, "upper": _vector,
                                          "G": _matrix, "h": _vector,
                                          "center": _vector,
                                          "radius": {"type": "number", "minimum": 0}}},
                 }},
            ]
        },
        "admm": {
            "type": "object", "required": ["beta"], "additionalProperties": False,
            "properties": {
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "eps_pri": {"type": "number", "exclusiveMinimum": 0},
                "eps_dua": {"type": "number", "exclusiveMinimum": 0},
                "variant": {"enum": ["scheme3", "scheme4"]},
                "cycle_window": {"type": "integer", "minimum": 1},
                "cycle_tol": {"type": "number", "exclusiveMinimum": 0},
                "prox_method": {"enum": ["auto", "qp"]},
                "fixed_iterations": {"type": "boolean"},
                "x_solver": {
                    "type": "object", "required": ["kind"], "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["closed_form", "global_1d", "projected_gradient"]},
                        "key": {"type": "string"},
                        "grid_1d": {"type": "integer", "minimum": 3},
                        "grid_2d": {"type": "integer", "minimum": 3},
                        "search_radius": {"type": "number", "exclusiveMinimum": 0},
                        "candidates": {"type": "integer", "minimum": 1},
                        "max_iter": {"type": "integer", "minimum": 1},
                        "tol": {"type": "number", "exclusiveMinimum": 0},
                    }},
            }},
        "init": {
            "oneOf": [
                {"type": "object", "required": ["y0", "lambda0"], "additionalProperties": False,
                 "properties": {"y0": _vector, "lambda0": _vector, "x0": _vector}},
                {"type": "object", "required": ["random"], "additionalProperties": False,
                 "properties": {"random": {
                     "type": "object", "required": ["radius", "count"],
                     "additionalProperties": False,
                     "properties": {"radius": {"type": "number", "exclusiveMinimum": 0},
                                    "count": {"type": "integer", "minimum": 1},
                                    "seed": {"type": "integer", "minimum": 0}}}}},
            ]
        },
        "reference": {
            "type": "object", "required": ["x_bar", "lambda_bar"], "additionalProperties": False,
            "properties": {"x_bar": _vector, "lambda_bar": _vector},
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {"enabled": {"type": "boolean"},
                           "theta": {"type": "number", "minimum": 0, "maximum": 1},
                           "lambda_star": _vector},
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "trace": {"type": "string"},
                           "report": {"type": "string"}},
        },
    },
}


def validate(cfg):
    """Raise ``UsageError`` naming the offending field."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise UsageError(f"config field {where}: {err.message}")


def load(path):
    """Read, parse and validate a config file; a string ``problem`` entry is
    read relative to the config's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    validate(cfg)
    if isinstance(cfg["problem"], str):
        sub = load_problem_file(path.parent / cfg["problem"])
        cfg = dict(cfg, problem=sub)
    return cfg


def load_problem_file(path):
    try:
        prob = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read problem file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    validate({"problem": prob, "admm": {"beta": 1.0}})
    if isinstance(prob, str):
        raise UsageError("problem files cannot chain to other files")
    return prob


def build_problem(problem_cfg):
    """``(ProblemSpec, default reference or None, closed-form key or None)``."""
    if "example" in problem_cfg:
        named = EXAMPLES[problem_cfg["example"]]()
        return named.spec, named.reference, named.closed_form
    try:
        f = smoothfn.from_config(problem_cfg["f"])
        g = MaxAffineFunction.from_config(problem_cfg["g"])
        C = convexset.from_config(problem_cfg["C"])
        return ProblemSpec(f, g, np.array(problem_cfg["A"], dtype=float), C), None, None
    except (TypeError, KeyError) as exc:
        raise UsageError(f"malformed problem definition: {exc}") from exc


def build_admm(admm_cfg, beta=None, max_iter=None):
    opts = dict(admm_cfg)
    xs = opts.pop("x_solver", None)
    if beta is not None:
        opts["beta"] = beta
    if max_iter is not None:
        opts["max_iter"] = max_iter
    x_solver = XSolverConfig(**xs) if xs else XSolverConfig()
    return AdmmConfig(x_solver=x_solver, **opts)


@dataclass
class RunConfig:
    """Everything a single CLI invocation needs, after validation."""

    spec: ProblemSpec
    admm: AdmmConfig
    inits: list
    reference: Optional[tuple]
    diagnostics: dict = field(default_factory=dict)
    out_dir: Path = Path(".")
    trace_name: str = "trace.csv"
    report_name: str = "report.json"
    seed: Optional[int] = None
    raw: dict = field(default_factory=dict)


def resolve(cfg, seed=None, beta=None, max_iter=None, out_dir=None):
    """Build a ``RunConfig`` from a validated dict plus CLI overrides."""
    from .admm import sample_initial_points

    spec, default_ref, _ = build_problem(cfg["problem"])
    admm = build_admm(cfg["admm"], beta, max_iter)
    reference = default_ref
    if "reference" in cfg:
        reference = (np.array(cfg["reference"]["x_bar"], dtype=float),
                     np.array(cfg["reference"]["lambda_bar"], dtype=float))
    if reference is not None and (reference[0].size != spec.n or reference[1].size != spec.m):
        raise UsageError("reference has the wrong dimensions")

    init = cfg.get("init", {"y0": [0.0] * spec.m, "lambda0": [0.0] * spec.m})
    used_seed = None
    if "random" in init:
        rnd = init["random"]
        used_seed = seed if seed is not None else rnd.get("seed", 0)
        rng = np.random.default_rng(used_seed)
        if reference is None:
            y_bar, lam_bar = np.zeros(spec.m), np.zeros(spec.m)
        else:
            y_bar, lam_bar = spec.A @ reference[0], reference[1]
        inits = [(y, lam, None) for y, lam in
                 sample_initial_points(rng, admm.beta, y_bar, lam_bar, rnd["radius"], rnd["count"])]
    else:
        y0 = np.array(init["y0"], dtype=float)
        lam0 = np.array(init["lambda0"], dtype=float)
        if y0.size != spec.m or lam0.size != spec.m:
            raise UsageError("init y0 and lambda0 must have length m")
        x0 = np.array(init["x0"], dtype=float) if "x0" in init else None
        inits = [(y0, lam0, x0)]

    outputs = cfg.get("outputs", {})
    directory = out_dir or os.environ.get(OUT_DIR_ENV) or outputs.get("dir", ".")
    return RunConfig(spec, admm, inits, reference, cfg.get("diagnostics", {}), Path(directory),
                     outputs.get("trace", "trace.csv"), outputs.get("report", "report.json"),
                     used_seed, cfg)


def admm_to_dict(cfg):
    out = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "x_solver"}
    out["x_solver"] = {f.name: getattr(cfg.x_solver, f.name) for f in fields(cfg.x_solver)
                       if getattr(cfg.x_solver, f.name) is not None}
    return out
