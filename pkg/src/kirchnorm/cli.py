"""Command-line interface: ``kirchnorm {constants,fiber,flow,mp,verify,sweep}``.

Parameters come from an optional JSON config file and are overridden by
flags. ``b``, ``c`` and ``mu`` accept threshold-relative values such as
``0.5b0`` or ``0.9c0``. Every output embeds the resolved run configuration;
with ``--out DIR`` the artifacts are written there together with
``manifest.json`` (input hash, versions, timings, file hashes, status).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import scipy

from . import __version__
from . import functionals as fn
from . import radial, scalar, solver, verify
from .errors import (ConvergenceError, DomainError, InvalidParams, KirchnormError,
                     MassMismatch, MissingConstant, NoRootFound, RegimeError,
                     SaturationError, SupportOverflow, TooManyRoots, ZeroField)
from .params import ProblemParams

log = logging.getLogger("kirchnorm")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_INVALID = 2
EXIT_REGIME = 3
EXIT_ROOTS = 4
EXIT_CONVERGENCE = 5
EXIT_GEOMETRY = 6
EXIT_CONSTANT = 7
EXIT_IO = 8
EXIT_OTHER = 9
EXIT_INTERNAL = 70

# first match wins, so subclasses come before their bases
_EXIT_MAP = (
    (InvalidParams, EXIT_INVALID),
    (RegimeError, EXIT_REGIME),
    ((NoRootFound, TooManyRoots, ZeroField, DomainError, SaturationError), EXIT_ROOTS),
    (ConvergenceError, EXIT_CONVERGENCE),
    ((MassMismatch, SupportOverflow), EXIT_GEOMETRY),
    (MissingConstant, EXIT_CONSTANT),
    (KirchnormError, EXIT_OTHER),
    (ValueError, EXIT_INVALID),
    (OSError, EXIT_IO),
)

SCHEMA = "kirchnorm.run/1"
PARAM_KEYS = ("N", "a", "b", "mu", "q", "c")


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_MAP:
        if isinstance(exc, cls):
            return code
    return EXIT_INTERNAL


# ------------------------------------------------------------------ run configuration

@dataclass
class GridSpec:
    """``n_cells=None`` keeps each command's default. ``r_factor`` and
    ``grading`` set ``R_max`` and the origin spacing of minimizer grids in
    units of the minimizer length scale."""

    n_cells: Optional[int] = None
    r_factor: float = 80.0
    grading: float = 20.0


@dataclass
class OutputSpec:
    dir: Optional[str] = None
    format: Optional[str] = None  # None: table for constants, json otherwise


@dataclass
class RunConfig:
    command: str
    inputs: dict
    params: ProblemParams
    grid: GridSpec = field(default_factory=GridSpec)
    flow: solver.FlowConfig = field(default_factory=solver.FlowConfig)
    output: OutputSpec = field(default_factory=OutputSpec)
    options: dict = field(default_factory=dict)
    verbosity: int = 0

    def as_dict(self) -> dict:
        return {"schema": SCHEMA, "version": __version__, "command": self.command,
                "inputs": self.inputs, "params": self.params.as_dict(),
                "grid": asdict(self.grid), "flow": self.flow.as_dict(),
                "output": asdict(self.output), "options": self.options,
                "verbosity": self.verbosity}

    def digest(self) -> str:
        d = self.as_dict()
        d.pop("output")
        d.pop("verbosity")
        return hashlib.sha256(_dumps(d).encode()).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _merge_section(cls, file_part: dict, overrides: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(file_part) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys in config: {sorted(unknown)}")
    vals = dict(file_part)
    vals.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**vals)


_OPTION_FLAGS = ("source", "field", "objective", "kind", "n", "regime", "depth", "axis",
                 "values", "jobs", "record_trajectory")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file first, flags on top, then threshold-relative resolution."""
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - {"params", "grid", "flow", "output", "options", "verbosity"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
    inputs = dict(doc.get("params", {}))
    unknown = set(inputs) - set(PARAM_KEYS)
    if unknown:
        raise ValueError(f"unknown params keys in config: {sorted(unknown)}")
    for k in PARAM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            inputs[k] = v
    options = dict(doc.get("options", {}))
    for k in _OPTION_FLAGS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            options[k] = v
    if "values" in options:
        options["values"] = _split_values(options["values"])

    grid = _merge_section(GridSpec, doc.get("grid", {}),
                          {"n_cells": args.n_cells, "r_factor": args.r_factor,
                           "grading": args.grading})
    flow_over = {"step": args.step, "max_iters": args.max_iters,
                 "residual_tol": args.residual_tol}
    if options.get("record_trajectory"):
        flow_over["record_trajectory"] = True
    flow = _merge_section(solver.FlowConfig, doc.get("flow", {}), flow_over)
    output = _merge_section(OutputSpec, doc.get("output", {}),
                            {"dir": args.out, "format": args.format})
    if output.format not in (None, "json", "csv", "table"):
        raise ValueError("output format must be json, csv or table")
    verbosity = args.verbose or int(doc.get("verbosity", 0))

    params = resolve_inputs(args.command, inputs, options)
    return RunConfig(args.command, _clean(inputs), params, grid, flow, output,
                     _clean(options), verbosity)


def _split_values(v):
    if isinstance(v, str):
        v = [v]
    out = []
    for item in v:
        if isinstance(item, str):
            out.extend(x.strip() for x in item.split(",") if x.strip())
        else:
            out.append(item)
    return out


def resolve_inputs(command: str, inputs: dict, options: dict) -> ProblemParams:
    """Numeric fields first, then ``b``, ``mu`` and ``c`` against thresholds.

    ``verify --regime X`` without parameters uses the regime's default sample;
    explicit parameters are applied on top of it.
    """
    if command == "verify" and options.get("regime"):
        base = verify.default_sample(options["regime"])
    else:
        base = ProblemParams(N=int(inputs.get("N", 5)))
    if "N" in inputs and int(inputs["N"]) != base.N:
        base = ProblemParams(N=int(inputs["N"]))
    numeric = {}
    for k in ("a", "q"):
        if k in inputs:
            numeric[k] = float(inputs[k])
    base = base.replace(**numeric)
    rel = {k: inputs[k] for k in ("mu", "b", "c") if k in inputs}
    return verify.resolve_params(base, **rel)


# ------------------------------------------------------------------ outputs

class Output:
    """Collects artifacts in memory and on disk; writes the manifest last."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.files = {}
        self.t0 = time.perf_counter()
        self.timings = {}
        if cfg.output.dir:
            os.makedirs(cfg.output.dir, exist_ok=True)

    def json(self, name: str, payload: dict) -> str:
        text = _dumps({"run_config": self.cfg.as_dict(), **payload}) + "\n"
        self._write(name, text)
        return text

    def csv(self, name: str, table: str) -> str:
        text = "# run_config=" + json.dumps(_clean(self.cfg.as_dict()), sort_keys=True) + "\n" + table
        self._write(name, text)
        return text

    def text(self, name: str, body: str) -> str:
        self._write(name, body)
        return body

    def _write(self, name: str, text: str):
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        if self.cfg.output.dir:
            with open(os.path.join(self.cfg.output.dir, name), "w") as fh:
                fh.write(text)

    def mark(self, label: str):
        self.timings[label] = time.perf_counter() - self.t0

    def manifest(self, status: str, code: int, error: Optional[str] = None):
        if not self.cfg.output.dir:
            return
        self.mark("total")
        doc = {
            "schema": "kirchnorm.manifest/1", "status": status, "exit_code": code,
            "command": self.cfg.command, "inputs_sha256": self.cfg.digest(),
            "run_config": self.cfg.as_dict(),
            "versions": {"kirchnorm": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "files": dict(sorted(self.files.items())),
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
        }
        if error:
            doc["error"] = error
        with open(os.path.join(self.cfg.output.dir, "manifest.json"), "w") as fh:
            fh.write(_dumps(doc) + "\n")


# ------------------------------------------------------------------ commands

_TABLE_ORDER = ("S", "b0", "b1", "C_q", "eta", "xi_minus", "xi_plus", "c_N_minus", "c_N_plus",
                "xi_1", "c_N", "Lambda", "k0", "c0", "c1", "k_c", "xi0_mu", "xi_minus_mu",
                "xi_plus_mu", "xi0_mu1")


def _thresholds(p: ProblemParams) -> scalar.ThresholdSet:
    C = None
    if p.mu != 0 or p.N == 4:
        C = fn.gn_constant(p.N, p.q)
    return scalar.thresholds(p, C_q=C)


def constants_table(th: scalar.ThresholdSet) -> str:
    p = th.params
    lines = [f"N={p.N} a={p.a!r} b={p.b!r} mu={p.mu!r} q={p.q!r} c={p.c!r}",
             f"regime: {verify.classify(p)}", ""]
    for name in _TABLE_ORDER:
        v = getattr(th, name)
        why = th.absent.get(name)
        shown = f"{v:.12g}" if v is not None else ("-" + (f"  ({why})" if why else ""))
        lines.append(f"{name:>12}  {shown}")
    return "\n".join(lines) + "\n"


def cmd_constants(cfg: RunConfig, out: Output):
    th = _thresholds(cfg.params)
    payload = {"kind": "ThresholdSet", "regime_tag": verify.classify(cfg.params),
               "thresholds": th.as_dict()}
    text = out.json("constants.json", payload)
    table = out.text("constants.txt", constants_table(th))
    return (text if cfg.output.format == "json" else table), EXIT_OK


def _load_field(path: str) -> radial.RadialField:
    with open(path) as fh:
        body = fh.read()
    if path.endswith(".json"):
        return radial.RadialField.from_json(body)
    return radial.RadialField.from_csv(body)


def cmd_fiber(cfg: RunConfig, out: Output):
    p = cfg.params
    source = cfg.options.get("source", "bubble")
    if source == "bubble":
        t = verify.bubble_tuple(p, n_cells=cfg.grid.n_cells or 8000)
        note = "mass-c bubble" if p.N >= 5 else "truncated bubble T_200 scaled to mass c"
    elif source == "file":
        if not cfg.options.get("field"):
            raise ValueError("--source file needs --field PATH")
        u = _load_field(cfg.options["field"])
        if u.grid.N != p.N:
            raise InvalidParams(f"field dimension N={u.grid.N} differs from N={p.N}")
        t = radial.norm_tuple(radial.project_mass(u, p.c), p.q)
        note = "field projected to mass c"
    else:
        raise ValueError("--source must be bubble or file")
    rep = fn.fiber_project(t, p)
    d = rep.as_dict()
    payload = {"kind": "FiberReport", "source": source, "note": note,
               "tuple": t.as_dict(), "classes": rep.classes(), "roots": d["roots"]}
    text = out.json("fiber.json", payload)
    table = "s,psi\n" + "".join(f"{s!r},{v!r}\n" for s, v in rep.landscape)
    csv_text = out.csv("fiber_landscape.csv", table)
    return (csv_text if cfg.output.format == "csv" else text), EXIT_OK


def _minimizer(cfg: RunConfig, objective: str) -> solver.FlowResult:
    n = cfg.grid.n_cells or 64000
    return solver.local_minimizer(cfg.params, objective, n_cells=n, config=cfg.flow,
                                  r_factor=cfg.grid.r_factor, grading=cfg.grid.grading)


def _flow_payload(res: solver.FlowResult) -> dict:
    return {"kind": "FlowResult", **json.loads(res.to_json())}


def cmd_flow(cfg: RunConfig, out: Output):
    objective = cfg.options.get("objective", "I")
    try:
        res = _minimizer(cfg, objective)
    except ConvergenceError as e:
        partial = e.diagnostics.get("result")
        if partial is not None:
            out.json("flow.json", _flow_payload(partial))
            out.csv("field.csv", partial.field.to_csv())
        raise
    out.mark("flow")
    text = out.json("flow.json", _flow_payload(res))
    out.csv("field.csv", res.field.to_csv())
    if res.trajectory:
        out.csv("trajectory.csv", res.trajectory_csv())
    return text, EXIT_OK


def cmd_mp(cfg: RunConfig, out: Output):
    p = cfg.params
    kind = cfg.options.get("kind", "mu0")
    if kind == "mu0":
        path = solver.mp_path_mu0(p, n_cells=cfg.grid.n_cells or 8000)
        payload = {"kind": "PathReport", **path.as_dict()}
    elif kind == "W":
        rI = _minimizer(cfg, "I")
        rJ = _minimizer(cfg, "J")
        out.mark("minimizers")
        path = solver.mp_path_W(p, rJ, n=int(cfg.options.get("n", 100)), m_c=rI.energy)
        est = solver.mp_level_estimate(p, [path])
        payload = {"kind": "PathReport", **path.as_dict(), "level_estimate": est.as_dict(),
                   "minimizer_I": rI.summary(), "minimizer_J": rJ.summary()}
    else:
        raise ValueError("--kind must be mu0 or W")
    out.mark("path")
    text = out.json("path.json", payload)
    csv_text = out.csv("path.csv", path.to_csv())
    return (csv_text if cfg.output.format == "csv" else text), EXIT_OK


def cmd_verify(cfg: RunConfig, out: Output):
    depth = cfg.options.get("depth", "quick")
    regime = cfg.options.get("regime")
    rep = verify.verify(cfg.params, depth, regime=regime)
    out.mark("verify")
    text = out.json("report.json", rep.as_dict())
    for c in rep.checks:
        log.info("%-9s %-40s %s", c.status, c.name, c.relation)
    return text, (EXIT_OK if rep.ok else EXIT_CHECKS_FAILED)


def cmd_sweep(cfg: RunConfig, out: Output):
    axis = cfg.options.get("axis")
    if not axis:
        raise ValueError("sweep needs --axis")
    values = cfg.options.get("values", [])
    rows = verify.sweep(axis, values, cfg.params, cfg.options.get("depth", "quick"),
                        int(cfg.options.get("jobs", 1)))
    out.mark("sweep")
    text = out.csv("sweep.csv", verify.sweep_csv(rows))
    return text, EXIT_OK


COMMANDS = {"constants": cmd_constants, "fiber": cmd_fiber, "flow": cmd_flow, "mp": cmd_mp,
            "verify": cmd_verify, "sweep": cmd_sweep}


# ------------------------------------------------------------------ argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("parameters (b, mu, c accept forms like 0.5b0, 0.9c0, bmid)")
    g.add_argument("--N", type=int)
    g.add_argument("--a", type=float)
    g.add_argument("--b")
    g.add_argument("--mu")
    g.add_argument("--q", type=float)
    g.add_argument("--c")
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--out", help="output directory for artifacts and manifest.json")
    common.add_argument("--format", choices=("json", "csv", "table"))
    common.add_argument("--n-cells", type=int, dest="n_cells")
    common.add_argument("--r-factor", type=float, dest="r_factor")
    common.add_argument("--grading", type=float)
    common.add_argument("--step", type=float)
    common.add_argument("--max-iters", type=int, dest="max_iters")
    common.add_argument("--residual-tol", type=float, dest="residual_tol")
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="kirchnorm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kirchnorm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common], help="closed-form thresholds")
    f = sub.add_parser("fiber", parents=[common], help="fiber-map critical points")
    f.add_argument("--source", choices=("bubble", "file"))
    f.add_argument("--field", help="field file (CSV or JSON as written by flow)")
    fl = sub.add_parser("flow", parents=[common], help="constrained gradient flow to a local minimizer")
    fl.add_argument("--objective", choices=("I", "J"))
    fl.add_argument("--record-trajectory", action="store_true", dest="record_trajectory")
    m = sub.add_parser("mp", parents=[common], help="mountain-pass path evaluation")
    m.add_argument("--kind", choices=("mu0", "W"))
    m.add_argument("--n", type=int, help="cut-off index of the W-path")
    v = sub.add_parser("verify", parents=[common], help="regime check list")
    v.add_argument("--regime", help="th2.1i, th2.1ii, th2.1iii, th2.3, th2.4, th2.5, th2.6, th2.7")
    v.add_argument("--depth", choices=("quick", "full"))
    s = sub.add_parser("sweep", parents=[common], help="one-parameter regime sweep")
    s.add_argument("--axis", choices=("b", "c", "mu", "q"))
    s.add_argument("--values", nargs="+", help="values, space or comma separated")
    s.add_argument("--depth", choices=("quick", "full"))
    s.add_argument("--jobs", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
    except Exception as e:
        code = exit_code_for(e)
        print(f"kirchnorm: error: {e}", file=sys.stderr)
        return code
    out = Output(cfg)
    try:
        text, code = COMMANDS[cfg.command](cfg, out)
    except Exception as e:
        code = exit_code_for(e)
        out.manifest("FAILED", code, f"{type(e).__name__}: {e}")
        print(f"kirchnorm: error ({type(e).__name__}): {e}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            raise
        return code
    out.manifest("OK" if code == EXIT_OK else "CHECKS_FAILED", code)
    try:
        sys.stdout.write(text)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader closed early (for example ``| head``); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return code


if __name__ == "__main__":
    sys.exit(main())
