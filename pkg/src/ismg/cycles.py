"""Pressure-solver drivers: plain red-black GS, the two-level ISMG/GMG cycle, ACM V-cycles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .coarsening import (MgHierarchy, build_acm_hierarchy, build_two_level, prolongate_bilinear,
                         prolongate_constant, restrict_sum)
from .field import ConfigurationError, GridSpec
from .metrics import RunMetrics
from .smoother import (FivePointStencil, LinearStage, gs_sweep_coarse, rbgs_sweep,
                       rbgs_sweep_max_residual, residual)

log = logging.getLogger(__name__)

SCHEMES = ("PLAIN", "ISMG", "GMG", "ACM")


@dataclass
class CycleConfig:
    """Solver selection and convergence control.

    ``tol_coarse`` applies to the coarse residual in summed (restricted) units.
    For ACM, ``depth`` defaults to ``log2(tile) + 1`` so that the coarsest ACM
    spacing equals the two-level tile.
    """

    scheme: str = "ISMG"
    tile: int = 16
    depth: int = None
    tol_fine: float = 1e-6
    tol_coarse: float = 1e-5
    max_total_sweeps: int = 20000
    acm_pre_smooth: int = 0
    acm_post_smooth: int = 1
    stall_factor: float = 0.9

    def __post_init__(self):
        self.scheme = self.scheme.upper()
        if self.scheme == "PLAINGS":
            self.scheme = "PLAIN"
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.depth is None:
            self.depth = int(round(math.log2(self.tile))) + 1 if self.tile >= 2 else 2
        if self.tol_fine <= 0 or self.tol_coarse < self.tol_fine:
            raise ConfigurationError(
                f"need 0 < tol_fine <= tol_coarse, got {self.tol_fine}, {self.tol_coarse}")
        if self.max_total_sweeps < 1 or self.acm_post_smooth < 0 or self.acm_pre_smooth < 0:
            raise ConfigurationError("sweep caps must be positive and smoothing counts non-negative")
        if not 0 < self.stall_factor <= 1:
            raise ConfigurationError(f"stall_factor must lie in (0, 1], got {self.stall_factor}")


@dataclass
class ConvergenceReport:
    converged: bool
    I_f: int = 0
    I_c: int = 0
    residual_final: float = 0.0
    coarse_visits: int = 0
    restrictions: int = 0
    prolongations: int = 0

    @property
    def sweeps(self):
        return self.I_f + self.I_c


class NonConvergence(RuntimeError):
    """The sweep cap was reached; carries the last iterate and its report."""

    def __init__(self, iterations, final_residual, solution=None, report=None):
        super().__init__(f"no convergence after {iterations} sweeps "
                         f"(max residual {final_residual:.3e})")
        self.iterations = iterations
        self.final_residual = final_residual
        self.solution = solution
        self.report = report


def _prepare(rhs, stencil, anchor):
    rhs = np.array(rhs, dtype=np.float64)
    if anchor:
        rhs -= rhs.mean()
    return LinearStage(stencil, rhs, np.zeros_like(rhs), 2)


def _anchor(x, anchor):
    if anchor:
        x -= x.mean()


def _is_singular(stencil):
    return bool(np.all(np.abs(stencil.row_sums()) <= 1e-12 * np.abs(stencil.cc).max()))


def solve_plain_gs(rhs, stencil: FivePointStencil, cfg: CycleConfig, metrics=None, anchor=None):
    """Red-black Gauss-Seidel on the fine grid until ``max|r| <= tol_fine``."""
    metrics = RunMetrics() if metrics is None else metrics
    anchor = _is_singular(stencil) if anchor is None else anchor
    stage = _prepare(rhs, stencil, anchor)
    cells = stencil.cells
    rep = ConvergenceReport(False)
    _, rmax = residual(stage)
    while rmax > cfg.tol_fine:
        if rep.sweeps >= cfg.max_total_sweeps:
            _anchor(stage.x, anchor)
            rep.residual_final = rmax
            raise NonConvergence(rep.sweeps, rmax, stage.x, rep)
        rmax = rbgs_sweep_max_residual(stage)
        metrics.record_sweep("fine", 5, cells, cells)
        rep.I_f += 1
        if rmax <= cfg.tol_fine:
            # confirm with the full residual, black cells included
            _, rmax = residual(stage)
    _anchor(stage.x, anchor)
    rep.converged = True
    rep.residual_final = rmax
    return stage.x, rep


def solve_two_level(rhs, hierarchy: MgHierarchy, cfg: CycleConfig, metrics=None, anchor=None):
    """Accommodative two-level cycle for ISMG and GMG.

    Each coarse visit restricts the fine residual by summation, iterates the
    coarse system from zero until its residual is below ``tol_coarse`` and adds
    the bilinear prolongation of the result. Fine red-black sweeps follow until
    the fine tolerance is met or a sweep reduces the residual by less than
    ``stall_factor`` (the first sweep after a visit is exempt), in which case
    the coarse grid is visited again.

    A hierarchy without an interpolated operator (two ACM levels) uses
    piecewise-constant prolongation instead.
    """
    metrics = RunMetrics() if metrics is None else metrics
    fine, coarse = hierarchy.levels[0], hierarchy.levels[1]
    if isinstance(coarse, FivePointStencil):
        coarse = coarse.to_nine_point()
    op = hierarchy.coarse
    anchor = _is_singular(fine) if anchor is None else anchor
    stage = _prepare(rhs, fine, anchor)
    cells = fine.cells
    rep = ConvergenceReport(False)

    def give_up(rmax):
        _anchor(stage.x, anchor)
        rep.residual_final = rmax
        raise NonConvergence(rep.sweeps, rmax, stage.x, rep)

    r, rmax = residual(stage)
    while rmax > cfg.tol_fine:
        rep.coarse_visits += 1
        if r is None:
            r = residual(stage)[0]
        rc = restrict_sum(r, hierarchy.tile)
        metrics.record_restriction()
        rep.restrictions += 1
        cstage = LinearStage(coarse, rc, np.zeros_like(rc), 1)
        _, cmax = residual(cstage)
        while cmax > cfg.tol_coarse:
            if rep.sweeps >= cfg.max_total_sweeps:
                give_up(rmax)
            gs_sweep_coarse(cstage)
            metrics.record_sweep("coarse", coarse.points, coarse.cells, cells)
            rep.I_c += 1
            _, cmax = residual(cstage)
        if cstage.sweeps:
            if op is None:
                stage.x += prolongate_constant(cstage.x, hierarchy.tile, stage.x.shape)
            else:
                stage.x += prolongate_bilinear(cstage.x, op)
            metrics.record_prolongation()
            rep.prolongations += 1
            _anchor(stage.x, anchor)
            r, rmax = residual(stage)
        first = True
        prev = rmax
        while rmax > cfg.tol_fine:
            if rep.sweeps >= cfg.max_total_sweeps:
                give_up(rmax)
            rmax = rbgs_sweep_max_residual(stage)
            r = None
            metrics.record_sweep("fine", 5, cells, cells)
            rep.I_f += 1
            if rmax <= cfg.tol_fine:
                r, rmax = residual(stage)
            if not first and rmax > cfg.stall_factor * prev:
                break
            first = False
            prev = rmax
        _anchor(stage.x, anchor)
    rep.converged = True
    rep.residual_final = rmax
    return stage.x, rep


def v_cycle_acm(rhs, hierarchy: MgHierarchy, cfg: CycleConfig, metrics=None, anchor=None):
    """ACM V-cycles with summed restriction and piecewise-constant correction.

    All levels use red-black sweeps. Only the coarsest level's sweeps count as
    coarse iterations; every other level's sweeps count as fine iterations.
    """
    metrics = RunMetrics() if metrics is None else metrics
    levels = hierarchy.levels
    d = len(levels)
    if d < 2:
        raise ConfigurationError("ACM hierarchy needs at least 2 levels")
    anchor = _is_singular(levels[0]) if anchor is None else anchor
    stage0 = _prepare(rhs, levels[0], anchor)
    fine_cells = levels[0].cells
    rep = ConvergenceReport(False)

    def sweep(stage, kind):
        if rep.sweeps >= cfg.max_total_sweeps:
            _anchor(stage0.x, anchor)
            rep.residual_final = rmax
            raise NonConvergence(rep.sweeps, rmax, stage0.x, rep)
        rbgs_sweep(stage)
        metrics.record_sweep(kind, 5, stage.stencil.cells, fine_cells, sync_cost=2)
        if kind == "fine":
            rep.I_f += 1
        else:
            rep.I_c += 1

    r, rmax = residual(stage0)
    while rmax > cfg.tol_fine:
        rep.coarse_visits += 1
        stages = [stage0]
        res = r
        if cfg.acm_pre_smooth:
            for _ in range(cfg.acm_pre_smooth):
                sweep(stage0, "fine")
            res = residual(stage0)[0]
        for k in range(1, d):
            b = restrict_sum(res, 2)
            metrics.record_restriction()
            rep.restrictions += 1
            st = LinearStage(levels[k], b, np.zeros_like(b), 2)
            stages.append(st)
            if k < d - 1 and cfg.acm_pre_smooth:
                for _ in range(cfg.acm_pre_smooth):
                    sweep(st, "fine")
                res = residual(st)[0]
            else:
                res = b
        coarsest = stages[-1]
        _, cmax = residual(coarsest)
        while cmax > cfg.tol_coarse:
            sweep(coarsest, "coarse")
            _, cmax = residual(coarsest)
        for k in range(d - 2, -1, -1):
            st = stages[k]
            st.x += prolongate_constant(stages[k + 1].x, 2, st.x.shape)
            metrics.record_prolongation()
            rep.prolongations += 1
            for _ in range(cfg.acm_post_smooth):
                sweep(st, "fine")
        _anchor(stage0.x, anchor)
        r, rmax = residual(stage0)
    rep.converged = True
    rep.residual_final = rmax
    return stage0.x, rep


class PressureSolver:
    """Builds the operators for one grid and scheme once; solves many right-hand sides."""

    def __init__(self, spec: GridSpec, cfg: CycleConfig):
        self.spec = spec
        self.cfg = cfg
        fine = FivePointStencil.from_grid(spec)
        if cfg.scheme == "PLAIN":
            self.hierarchy = MgHierarchy("PLAIN", [fine])
        elif cfg.scheme in ("ISMG", "GMG"):
            if spec.nx < 2 * cfg.tile or spec.ny < 2 * cfg.tile:
                raise ConfigurationError(
                    f"{cfg.scheme} with tile {cfg.tile} needs a grid of at least "
                    f"{2 * cfg.tile}x{2 * cfg.tile}, got {spec.nx}x{spec.ny}")
            self.hierarchy = build_two_level(spec.with_tile(cfg.tile), cfg.scheme)
        else:
            self.hierarchy = build_acm_hierarchy(spec, cfg.depth)
        self.anchor = spec.singular
        log.debug("pressure solver %s on %dx%d, %d levels", cfg.scheme, spec.nx, spec.ny,
                  self.hierarchy.depth)

    @property
    def fine_stencil(self):
        return self.hierarchy.levels[0]

    def solve(self, rhs, metrics=None):
        if self.cfg.scheme == "PLAIN":
            return solve_plain_gs(rhs, self.fine_stencil, self.cfg, metrics, self.anchor)
        if self.cfg.scheme == "ACM":
            return v_cycle_acm(rhs, self.hierarchy, self.cfg, metrics, self.anchor)
        return solve_two_level(rhs, self.hierarchy, self.cfg, metrics, self.anchor)
