"""Benchmark setups and the sweep harness.

Every case uses ``h = 1`` unless stated otherwise, so velocities and
viscosities are in grid units. A sweep runs one simulation per
``(scheme, coarsest spacing, tol_coarse)`` cell and reports the per-step
means of the accounting counters over a trailing window.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cycles import CycleConfig, NonConvergence, PressureSolver
from .field import (BoundaryCondition, ConfigurationError, GridSpec, apply_scalar_bc,
                    apply_velocity_bc, write_vtk)
from .metrics import RunMetrics
from .projection import FluidState, kinetic_energy, max_divergence, step

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("scheme", "tile_or_depth", "tol_coarse", "NCC_f", "NCC_c", "NCC_t", "N_Lap",
                 "converged")

# reference centerline extrema at Re = 1000 (u_ext, v_min, v_max)
LID_REFERENCE = (0.3781, -0.5142, 0.3659)


@dataclass
class BenchmarkCase:
    """A simulation setup plus the axes of its solver sweep.

    ``tiles`` lists coarsest spacings in units of ``h``: the tile for
    ISMG/GMG and ``2**(depth - 1)`` for ACM. ``steady_tol`` stops a run once
    the largest face-velocity change in one step drops below it, and
    ``t_max`` caps the simulated time.
    """

    name: str
    spec: GridSpec
    nu: float
    v0: float
    dt: float = 1.0
    steps: int = 1000
    window: int = None
    tiles: tuple = (8, 16)
    tol_coarse: tuple = (1e-5,)
    tol_fine: float = 1e-6
    max_total_sweeps: int = 20000
    accept_nonconverged: bool = False
    steady_tol: float = None
    t_max: float = None
    init: str = "rest"
    amplitude: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window is None:
            self.window = self.steps
        self.tiles = tuple(int(t) for t in self.tiles)
        self.tol_coarse = tuple(float(t) for t in self.tol_coarse)
        if not self.tiles or not self.tol_coarse:
            raise ConfigurationError(f"case {self.name}: sweep axes must be non-empty")
        if self.steps < 1 or not 1 <= self.window <= self.steps:
            raise ConfigurationError(
                f"case {self.name}: need 1 <= window <= steps, got window={self.window}, "
                f"steps={self.steps}")
        for t in self.tiles:
            if t < 2 or t & (t - 1):
                raise ConfigurationError(f"case {self.name}: coarsest spacing {t} is not a power of 2")
        if self.dt < 0 or self.nu < 0:
            raise ConfigurationError(f"case {self.name}: dt and nu must be non-negative")
        if self.init not in ("rest", "taylor_green"):
            raise ConfigurationError(f"case {self.name}: unknown initial state {self.init!r}")

    def cycle_config(self, scheme, tile=None, tol_coarse=None, **overrides):
        """Solver settings for one sweep cell."""
        tile = self.tiles[0] if tile is None else tile
        tol_coarse = self.tol_coarse[0] if tol_coarse is None else tol_coarse
        kw = dict(scheme=scheme, tile=tile, depth=int(round(math.log2(tile))) + 1,
                  tol_fine=self.tol_fine, tol_coarse=max(tol_coarse, self.tol_fine),
                  max_total_sweeps=self.max_total_sweeps)
        kw.update(overrides)
        return CycleConfig(**kw)


def _walls(**sides):
    bc = {s: BoundaryCondition.wall() for s in "WESN"}
    bc.update(sides)
    return bc


def setup_shear_cavity(n=500, steps=1000, v0=0.1, nu=0.1, dt=1.0, **kw):
    """Counter-clockwise shear-driven cavity with the left wall reversed.

    Bottom moves with ``u = +v0``, right with ``v = +v0``, top with
    ``u = -v0``; the left wall would close the loop with ``v = -v0`` but is
    reversed to ``v = +v0``.
    """
    bc = _walls(S=BoundaryCondition.wall(u=v0), E=BoundaryCondition.wall(v=v0),
                N=BoundaryCondition.wall(u=-v0), W=BoundaryCondition.wall(v=v0))
    kw.setdefault("tiles", (4, 8, 16, 32))
    kw.setdefault("tol_coarse", (1e-6, 1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 1e-4))
    return BenchmarkCase(f"shear_cavity_{n}", GridSpec(n, n, 1.0, 16, bc), nu, v0, dt, steps,
                         **kw)


def lid_time_step(n, Re=1000.0, U=0.1):
    """Largest comfortable explicit step for the lid cavity in grid units.

    Central advection with forward Euler needs ``dt * |v|^2 <= nu`` in two
    dimensions; diffusion needs ``4 nu dt <= h^2``. Both get a 0.8 margin.
    """
    nu = U * n / Re
    return min(0.8 * nu / U ** 2, 0.8 / (4.0 * nu))


def setup_lid_cavity(n=512, Re=1000.0, U=0.1, dt=None, t_end=150.0, steady_tol=1e-10, **kw):
    """Lid-driven cavity run towards steady state.

    ``t_end`` is in convective units ``L / U``; the run stops earlier once the
    largest per-step face-velocity change drops below ``steady_tol``.
    """
    nu = U * n / Re
    dt = lid_time_step(n, Re, U) if dt is None else dt
    t_max = t_end * n / U
    steps = int(math.ceil(t_max / dt))
    bc = _walls(N=BoundaryCondition.wall(u=U))
    kw.setdefault("tiles", (16,))
    kw.setdefault("window", min(steps, 100))
    tile = 16 if n >= 32 else 2
    return BenchmarkCase(f"lid_cavity_{n}", GridSpec(n, n, 1.0, tile, bc), nu, U, dt, steps,
                         steady_tol=steady_tol, t_max=t_max, extra={"Re": Re}, **kw)


def setup_jet(nx=1000, ny=2000, width=16, v0=0.1, nu=0.01, dt=1.0, steps=1000, **kw):
    """Jet from a centred bottom inlet into a box open at the top.

    Left, right and bottom are no-slip; the top is a symmetry plane with
    fixed pressure. Pressure solves are capped at 20000 sweeps and a capped
    iterate is accepted.
    """
    start = (nx - width) // 2
    bc = _walls(S=BoundaryCondition.inlet(v0, start, width), N=BoundaryCondition.symmetry())
    kw.setdefault("tiles", (16, 32))
    kw.setdefault("tol_coarse", (1e-6, 1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 1e-4))
    kw.setdefault("accept_nonconverged", True)
    kw.setdefault("max_total_sweeps", 20000)
    return BenchmarkCase(f"jet_{nx}x{ny}", GridSpec(nx, ny, 1.0, 16, bc), nu, v0, dt, steps,
                         **kw)


def setup_channel_jets(nx=1000, ny=500, width=25, spacing=200, v0=0.1, nu=0.01, dt=1.0,
                       steps=1000, **kw):
    """Channel periodic in x with equally spaced jets entering from the bottom.

    Single-process stand-in for the multi-device channel case: usable for
    synchronization counts only.
    """
    start = (spacing - width) // 2
    bc = {"W": BoundaryCondition.periodic(), "E": BoundaryCondition.periodic(),
          "S": BoundaryCondition.inlet(v0, start, width, period=spacing),
          "N": BoundaryCondition.symmetry()}
    kw.setdefault("tiles", (16, 32))
    kw.setdefault("accept_nonconverged", True)
    kw.setdefault("max_total_sweeps", 20000)
    return BenchmarkCase(f"channel_jets_{nx}x{ny}", GridSpec(nx, ny, 1.0, 16, bc), nu, v0, dt,
                         steps, **kw)


def setup_quiescent(n=64, steps=10, **kw):
    """Closed box at rest; every step is trivially converged."""
    return BenchmarkCase(f"quiescent_{n}", GridSpec(n, n, 1.0, 16), 0.1, 0.0, 1.0, steps, **kw)


def setup_taylor_green(n=32, amplitude=1e-3, nu=0.05, dt=1.0, steps=100, **kw):
    """Doubly periodic decaying vortex with one wavelength per side."""
    bc = {s: BoundaryCondition.periodic() for s in "WESN"}
    kw.setdefault("tiles", (8,))
    return BenchmarkCase(f"taylor_green_{n}", GridSpec(n, n, 1.0, 8, bc), nu, amplitude, dt,
                         steps, init="taylor_green", amplitude=amplitude, **kw)


def taylor_green_rate(spec: GridSpec, nu):
    """Discrete kinetic-energy decay rate ``2 nu k^2`` of the single-mode vortex.

    ``k^2`` is the eigenvalue of the five-point Laplacian for one wavelength
    per side, so the semi-discrete energy follows ``exp(-rate * t)``.
    """
    k2 = 0.0
    for n in (spec.nx, spec.ny):
        L = n * spec.h
        k2 += (2.0 - 2.0 * math.cos(2.0 * math.pi * spec.h / L)) / spec.h ** 2
    return 2.0 * nu * k2


def initial_state(case: BenchmarkCase, seed=None) -> FluidState:
    """Starting state; ``seed`` adds a reproducible perturbation of size ``1e-6 v0``."""
    spec = case.spec
    state = FluidState.at_rest(spec, case.dt, case.nu)
    if case.init == "taylor_green":
        h = spec.h
        kx = 2.0 * math.pi / (spec.nx * h)
        ky = 2.0 * math.pi / (spec.ny * h)
        xu = np.arange(spec.nx + 1) * h
        yc = (np.arange(spec.ny + 2) - 0.5) * h
        xc = (np.arange(spec.nx + 2) - 0.5) * h
        yv = np.arange(spec.ny + 1) * h
        a = case.amplitude
        # amplitude ratio that makes the discrete divergence vanish exactly
        b = a * math.sin(kx * h / 2) / math.sin(ky * h / 2)
        state.vel.u[:] = a * np.sin(kx * xu)[:, None] * np.cos(ky * yc)[None, :]
        state.vel.v[:] = -b * np.cos(kx * xc)[:, None] * np.sin(ky * yv)[None, :]
    if seed is not None:
        rng = np.random.default_rng(seed)
        eps = 1e-6 * (case.v0 if case.v0 else 1.0)
        state.vel.u[1:-1, 1:-1] += eps * rng.standard_normal(state.vel.u[1:-1, 1:-1].shape)
        state.vel.v[1:-1, 1:-1] += eps * rng.standard_normal(state.vel.v[1:-1, 1:-1].shape)
    apply_velocity_bc(state.vel, spec)
    apply_scalar_bc(state.p, spec, fixed_values=True)
    return state


@dataclass
class RunResult:
    state: FluidState
    metrics: RunMetrics
    steps: int
    converged: bool
    stop_reason: str
    max_div: list
    energy: list
    max_change: float = float("nan")


def run_case(case: BenchmarkCase, cfg: CycleConfig, steps=None, out_dir=None,
             snapshot_interval=None, seed=None, solver=None, state=None, progress=None,
             metrics=None):
    """Advance ``case`` by ``steps`` timesteps (all of ``case.steps`` by default).

    Without ``case.accept_nonconverged`` a pressure solve that hits the sweep
    cap raises :class:`NonConvergence` after its row has been recorded in
    ``metrics`` (pass one in to keep the partial history).
    Snapshots go to ``out_dir/snapshot_<step>.vtk`` every
    ``snapshot_interval`` steps.
    """
    spec = case.spec
    steps = case.steps if steps is None else steps
    solver = PressureSolver(spec, cfg) if solver is None else solver
    state = initial_state(case, seed) if state is None else state
    metrics = RunMetrics() if metrics is None else metrics
    out_dir = Path(out_dir) if out_dir is not None else None
    if snapshot_interval and out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    res = RunResult(state, metrics, 0, True, "steps", [], [kinetic_energy(state.vel, spec)])
    for n in range(1, steps + 1):
        new = step(state, spec, solver, metrics, accept_nonconverged=case.accept_nonconverged)
        if new.report is not None and not new.report.converged:
            res.converged = False
        res.max_div.append(max_divergence(new.vel, spec))
        res.energy.append(kinetic_energy(new.vel, spec))
        if not math.isfinite(res.energy[-1]):
            res.state, res.steps, res.stop_reason = new, n, "diverged"
            log.warning("%s: kinetic energy is not finite at step %d", case.name, n)
            return res
        change = max(float(np.abs(new.vel.u - state.vel.u).max()),
                     float(np.abs(new.vel.v - state.vel.v).max()))
        state = new
        res.max_change = change
        if snapshot_interval and out_dir is not None and n % snapshot_interval == 0:
            write_vtk(out_dir / f"snapshot_{n:07d}.vtk", spec, state.p, state.vel,
                      f"{case.name} step {n}")
        if progress is not None:
            progress(n, state, metrics)
        if case.steady_tol is not None and change < case.steady_tol:
            res.stop_reason = "steady"
            break
        if case.t_max is not None and state.t >= case.t_max - 1e-9 * case.dt:
            res.stop_reason = "t_max"
            break
    res.state, res.steps = state, n
    return res


def centerline_extrema(state: FluidState, spec: GridSpec, U):
    """Lid-cavity extrema ``(u_ext, v_min, v_max)`` scaled by ``U``.

    ``u`` is taken on the vertical centerline and ``v`` on the horizontal one;
    each extremum is refined by the vertex of the parabola through the
    discrete extremum and its two neighbours. ``u_ext`` is reported as a
    magnitude.
    """
    u = state.vel.u[:, 1:-1]
    v = state.vel.v[1:-1, :]
    if spec.nx % 2 == 0:
        ucol = u[spec.nx // 2]
    else:
        ucol = 0.5 * (u[spec.nx // 2] + u[spec.nx // 2 + 1])
    if spec.ny % 2 == 0:
        vrow = v[:, spec.ny // 2]
    else:
        vrow = 0.5 * (v[:, spec.ny // 2] + v[:, spec.ny // 2 + 1])
    u_ext = -parabolic_extremum(ucol, "min") / U
    return u_ext, parabolic_extremum(vrow, "min") / U, parabolic_extremum(vrow, "max") / U


def parabolic_extremum(f, kind="min"):
    """Extremum of samples ``f`` refined by a three-point parabola fit."""
    f = np.asarray(f, dtype=np.float64)
    k = int(np.argmin(f) if kind == "min" else np.argmax(f))
    if k == 0 or k == f.size - 1:
        return float(f[k])
    fm, f0, fp = f[k - 1], f[k], f[k + 1]
    curv = fp - 2.0 * f0 + fm
    if curv == 0.0:
        return float(f0)
    return float(f0 - (fp - fm) ** 2 / (8.0 * curv))


def sweep_cells(case: BenchmarkCase, schemes, tiles=None, tols=None):
    """Expand the sweep axes into ``(scheme, tile, tol_coarse)`` cells.

    PlainGS has no coarse level, so it contributes a single cell.
    """
    tiles = case.tiles if tiles is None else tuple(tiles)
    tols = case.tol_coarse if tols is None else tuple(tols)
    cells = []
    for scheme in schemes:
        scheme = CycleConfig(scheme=scheme).scheme
        if scheme == "PLAIN":
            cells.append((scheme, None, None))
            continue
        cells.extend((scheme, t, tol) for t in tiles for tol in tols)
    return cells


def _fmt(x):
    return f"{x:.6g}"


def metrics_filename(row):
    """Per-cell metrics file name for a sweep row (``n/a`` becomes ``na``)."""
    tol = row["tol_coarse"].replace("/", "")
    return f"metrics_{row['scheme']}_{row['tile_or_depth']}_{tol}.csv"


def _run_cell(case, scheme, tile, tol, steps, metrics_dir):
    """One sweep cell; returns the sweep CSV row as a dict."""
    cfg = case.cycle_config(scheme, tile, tol)
    if scheme == "PLAIN":
        label, tol_label = "1", "n/a"
    elif scheme == "ACM":
        label, tol_label = str(cfg.depth), _fmt(tol)
    else:
        label, tol_label = str(tile), _fmt(tol)
    row = {"scheme": scheme, "tile_or_depth": label, "tol_coarse": tol_label}
    try:
        res = run_case(case, cfg, steps=steps)
    except NonConvergence as exc:
        log.info("%s %s/%s: %s", scheme, label, tol_label, exc)
        res = None
    if res is None or res.stop_reason == "diverged":
        row.update({k: "-" for k in ("NCC_f", "NCC_c", "NCC_t", "N_Lap")}, converged="false")
        return row
    if metrics_dir is not None:
        res.metrics.write_csv(Path(metrics_dir) / metrics_filename(row))
    window = min(case.window, len(res.metrics.rows))
    m = res.metrics.means(window)
    row.update({k: _fmt(m[k]) for k in ("NCC_f", "NCC_c", "NCC_t", "N_Lap")})
    row["converged"] = "true" if res.converged else "false"
    return row


def run_sweep(case: BenchmarkCase, schemes=("ISMG", "ACM"), tiles=None, tols=None,
              out_dir=None, jobs=1, steps=None):
    """Run every sweep cell and write ``sweep.csv`` (plus per-cell metrics) to ``out_dir``.

    A cell that aborts with :class:`NonConvergence` or whose flow diverges
    gets ``-`` entries and the sweep continues. Cells are independent, so ``jobs > 1`` runs them in
    separate processes.
    """
    cells = sweep_cells(case, schemes, tiles, tols)
    steps = case.steps if steps is None else steps
    if steps < case.window:
        case = replace(case, window=steps)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    args = [(case, s, t, tol, steps, out_dir) for s, t, tol in cells]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_run_cell, *zip(*args)))
    else:
        rows = [_run_cell(*a) for a in args]
    if out_dir is not None:
        write_sweep_csv(out_dir / "sweep.csv", rows)
    return rows


def write_sweep_csv(path, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def read_sweep_csv(path):
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


def best_cell(rows, scheme, key="NCC_t"):
    """Converged row of ``scheme`` with the smallest ``key``, or ``None``."""
    ok = [r for r in rows if r["scheme"] == scheme and r[key] != "-" and r["converged"] == "true"]
    return min(ok, key=lambda r: float(r[key])) if ok else None
