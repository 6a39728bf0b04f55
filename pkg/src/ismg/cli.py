"""Command-line front end.

Configs are flat ``key = value`` files with section prefixes::

    case.name = shear_cavity
    grid.nx = 500
    solver.scheme = ISMG

A config argument may also name one of the embedded configs
(``ismg run shear_cavity_ci``). Exit codes: 0 success, 1 pressure solve
aborted without convergence (or a failed cavity validation), 2 bad config.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import bench
from .coarsening import build_gmg_operator, build_ismg_operator
from .cycles import SCHEMES, CycleConfig, NonConvergence
from .field import ConfigurationError, write_vtk
from .metrics import RunMetrics
from .plotting import plot_iterations, plot_sweep, plot_velocity_magnitude

log = logging.getLogger("ismg")

CASES = ("shear_cavity", "lid_cavity", "jet", "channel_jets", "quiescent", "taylor_green")


def _bool(s):
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.replace(",", " ").split())


def _ints(s):
    return tuple(int(x) for x in s.replace(",", " ").split())


def _words(s):
    return tuple(x for x in s.replace(",", " ").split())


# every accepted key and its parser
KEYS = {
    "case.name": str, "case.steps": int, "case.window": int, "case.dt": float,
    "case.nu": float, "case.v0": float, "case.re": float, "case.t_end": float,
    "case.steady_tol": float, "case.width": int, "case.spacing": int, "case.amplitude": float,
    "case.accept_nonconverged": _bool,
    "grid.nx": int, "grid.ny": int,
    "solver.scheme": str, "solver.tile": int, "solver.depth": int, "solver.tol_fine": float,
    "solver.tol_coarse": float, "solver.max_total_sweeps": int, "solver.acm_pre_smooth": int,
    "solver.acm_post_smooth": int, "solver.stall_factor": float,
    "sweep.schemes": _words, "sweep.tiles": _ints, "sweep.tol_coarse": _floats,
    "output.dir": str, "output.snapshot_interval": int, "output.precision": int,
    "output.seed": int,
}


@dataclass
class RunConfig:
    """Validated settings for one invocation."""

    case: str = "shear_cavity"
    values: dict = field(default_factory=dict)
    output_dir: Path = Path("ismg_out")
    snapshot_interval: int = 0
    precision: int = 64
    seed: int = None

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = KEYS[key](val)
        except ValueError as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def embedded_configs():
    return sorted(p.name[:-4] for p in resources.files("ismg.configs").iterdir()
                  if p.name.endswith(".cfg"))


def load_config(ref):
    """Read a config file, falling back to an embedded config of that name."""
    path = Path(ref)
    if path.is_file():
        return parse_config_text(path.read_text(), str(path))
    name = ref[:-4] if ref.endswith(".cfg") else ref
    res = resources.files("ismg.configs") / f"{name}.cfg"
    if res.is_file():
        return parse_config_text(res.read_text(), f"embedded:{name}")
    raise ConfigurationError(
        f"config {ref!r} is neither a file nor an embedded config ({', '.join(embedded_configs())})")


def build_run_config(values, args=None):
    """Merge file values and command-line overrides, then validate."""
    case = values.get("case.name", "shear_cavity")
    if case not in CASES:
        raise ConfigurationError(f"case.name must be one of {CASES}, got {case!r}")
    if "solver.scheme" in values and values["solver.scheme"].upper() not in SCHEMES + ("PLAINGS",):
        raise ConfigurationError(f"solver.scheme must be one of {SCHEMES}")
    rc = RunConfig(case, dict(values))
    rc.output_dir = Path(values.get("output.dir", "ismg_out"))
    rc.snapshot_interval = values.get("output.snapshot_interval", 0)
    rc.precision = values.get("output.precision", 64)
    rc.seed = values.get("output.seed")
    if args is not None:
        if getattr(args, "out", None):
            rc.output_dir = Path(args.out)
        if getattr(args, "snapshot_every", None) is not None:
            rc.snapshot_interval = args.snapshot_every
        if getattr(args, "precision", None) is not None:
            rc.precision = args.precision
    if rc.precision not in (32, 64):
        raise ConfigurationError(f"precision must be 32 or 64, got {rc.precision}")
    if rc.snapshot_interval < 0:
        raise ConfigurationError("snapshot interval must be non-negative")
    return rc


def make_case(rc: RunConfig) -> bench.BenchmarkCase:
    """Instantiate the benchmark case named in the config."""
    v = rc.values
    kw = {}
    for key, name in (("case.steps", "steps"), ("case.dt", "dt"), ("case.nu", "nu"),
                      ("case.v0", "v0"), ("case.window", "window"),
                      ("case.accept_nonconverged", "accept_nonconverged")):
        if key in v:
            kw[name] = v[key]
    if "sweep.tiles" in v:
        kw["tiles"] = v["sweep.tiles"]
    if "sweep.tol_coarse" in v:
        kw["tol_coarse"] = v["sweep.tol_coarse"]
    if "solver.tol_fine" in v:
        kw["tol_fine"] = v["solver.tol_fine"]
    if "solver.max_total_sweeps" in v:
        kw["max_total_sweeps"] = v["solver.max_total_sweeps"]
    nx, ny = v.get("grid.nx"), v.get("grid.ny")
    square = rc.case in ("shear_cavity", "lid_cavity", "quiescent", "taylor_green")
    if square and nx is not None and ny is not None and nx != ny:
        raise ConfigurationError(f"case {rc.case} needs a square grid, got {nx}x{ny}")
    n = nx if nx is not None else ny
    if rc.case == "shear_cavity":
        case = bench.setup_shear_cavity(n or 500, **kw)
    elif rc.case == "lid_cavity":
        for key, name in (("case.re", "Re"), ("case.t_end", "t_end"),
                          ("case.steady_tol", "steady_tol")):
            if key in v:
                kw[name] = v[key]
        if "v0" in kw:
            kw["U"] = kw.pop("v0")
        kw.pop("steps", None)
        case = bench.setup_lid_cavity(n or 512, **kw)
    elif rc.case in ("jet", "channel_jets"):
        if "case.width" in v:
            kw["width"] = v["case.width"]
        if rc.case == "jet":
            case = bench.setup_jet(nx or 1000, ny or 2000, **kw)
        else:
            if "case.spacing" in v:
                kw["spacing"] = v["case.spacing"]
            case = bench.setup_channel_jets(nx or 1000, ny or 500, **kw)
    elif rc.case == "quiescent":
        case = bench.setup_quiescent(n or 64, **kw)
    else:
        if "case.amplitude" in v:
            kw["amplitude"] = v["case.amplitude"]
        case = bench.setup_taylor_green(n or 32, **kw)
    if "case.steady_tol" in v and rc.case != "lid_cavity":
        case.steady_tol = v["case.steady_tol"]
    if rc.precision == 32:
        case.spec.dtype = np.float32
    return case


def make_cycle_config(rc: RunConfig, case) -> CycleConfig:
    v = rc.values
    overrides = {k.split(".", 1)[1]: v[k] for k in
                 ("solver.depth", "solver.acm_pre_smooth", "solver.acm_post_smooth",
                  "solver.stall_factor") if k in v}
    return case.cycle_config(v.get("solver.scheme", "ISMG"), v.get("solver.tile"),
                             v.get("solver.tol_coarse"), **overrides)


def _summary_lines(pairs):
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def cmd_run(args):
    rc = build_run_config(load_config(args.config), args)
    case = make_case(rc)
    cfg = make_cycle_config(rc, case)
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s with %s, %d steps", case.name, cfg.scheme, case.steps)
    status = 0
    metrics = RunMetrics()
    try:
        res = bench.run_case(case, cfg, out_dir=out, snapshot_interval=rc.snapshot_interval,
                             seed=rc.seed, metrics=metrics)
        state, reason = res.state, res.stop_reason
    except NonConvergence as exc:
        print(f"error: pressure solve aborted: {exc}", file=sys.stderr)
        state, reason, status = None, "nonconvergence", 1
    metrics.write_csv(out / "metrics.csv")
    plot_iterations(metrics.rows, out / "iterations.png", f"{case.name} {cfg.scheme}")
    pairs = [("case", case.name), ("scheme", cfg.scheme), ("tile", cfg.tile),
             ("depth", cfg.depth), ("tol_fine", cfg.tol_fine), ("tol_coarse", cfg.tol_coarse),
             ("stop_reason", reason)]
    if state is not None:
        write_vtk(out / "final.vtk", case.spec, state.p, state.vel, case.name)
        plot_velocity_magnitude(state, case.spec, out / "velocity.png", case.name)
        pairs.append(("max_divergence", f"{res.max_div[-1] if res.max_div else 0.0:.6g}"))
    text = _summary_lines(pairs) + metrics.summary(min(case.window, len(metrics.rows)) or None)
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return status


def cmd_sweep(args):
    rc = build_run_config(load_config(args.config), args)
    case = make_case(rc)
    schemes = rc.get("sweep.schemes", ("ISMG", "ACM"))
    for s in schemes:
        CycleConfig(scheme=s)
    out = rc.output_dir
    rows = bench.run_sweep(case, schemes, out_dir=out, jobs=args.jobs)
    plot_sweep(rows, out / "sweep_ncc.png", "NCC_t")
    plot_sweep(rows, out / "sweep_nlap.png", "N_Lap")
    sys.stdout.write((out / "sweep.csv").read_text())
    return 0


def cmd_validate_cavity(args):
    n = args.n
    tol = 0.02 if n >= 256 else 0.03
    values = {"case.name": "lid_cavity", "grid.nx": n}
    if args.t_end is not None:
        values["case.t_end"] = args.t_end
    values["solver.scheme"] = args.scheme
    rc = build_run_config(values, args)
    case = make_case(rc)
    cfg = make_cycle_config(rc, case)
    res = bench.run_case(case, cfg)
    got = bench.centerline_extrema(res.state, case.spec, case.v0)
    ok = True
    print(f"grid = {n}x{n}")
    print(f"stop_reason = {res.stop_reason}")
    print(f"steps = {res.steps}")
    for name, g, ref in zip(("u_ext", "v_min", "v_max"), got, bench.LID_REFERENCE):
        good = abs(g - ref) <= tol
        ok &= good
        print(f"{name} = {g:.4f} reference = {ref:.4f} diff = {g - ref:+.4f} "
              f"{'PASS' if good else 'FAIL'}")
    print(f"result = {'PASS' if ok else 'FAIL'} (tolerance {tol})")
    if rc.output_dir is not None and args.out:
        out = rc.output_dir
        out.mkdir(parents=True, exist_ok=True)
        plot_velocity_magnitude(res.state, case.spec, out / "velocity.png", case.name)
        res.metrics.write_csv(out / "metrics.csv")
    return 0 if ok else 1


def cmd_dump_operator(args):
    rc = build_run_config(load_config(args.config), args)
    case = make_case(rc)
    cfg = make_cycle_config(rc, case)
    spec = case.spec.with_tile(cfg.tile)
    if cfg.scheme == "ISMG":
        op = build_ismg_operator(spec)
    elif cfg.scheme == "GMG":
        op = build_gmg_operator(spec)
    else:
        raise ConfigurationError(f"dump-operator needs solver.scheme ISMG or GMG, got {cfg.scheme}")
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    path = op.write_csv(out / "coarse_operator.csv")
    print(f"operator = {path}")
    print(f"coarse_cells = {op.ncx}x{op.ncy}")
    return 0


def _common(p):
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel sweep processes")
    p.add_argument("--precision", type=int, choices=(32, 64), help="field precision in bits")
    p.add_argument("--snapshot-every", type=int, metavar="K", dest="snapshot_every",
                   help="write a VTK snapshot every K steps")


def build_parser():
    parser = argparse.ArgumentParser(prog="ismg", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("config")
    _common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run the scheme/tile/tolerance sweep")
    p.add_argument("config")
    _common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("validate-cavity", help="lid-driven cavity centerline check")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--t-end", type=float, dest="t_end", help="end time in units of L/U")
    p.add_argument("--scheme", default="ISMG")
    _common(p)
    p.set_defaults(func=cmd_validate_cavity)
    p = sub.add_parser("dump-operator", help="write the coarse operator as CSV")
    p.add_argument("config")
    _common(p)
    p.set_defaults(func=cmd_dump_operator)
    return parser


def _setup_logging():
    level = os.environ.get("ISMG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
