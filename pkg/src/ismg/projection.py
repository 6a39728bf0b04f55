"""Incremental pressure-correction time stepping on the staggered grid.

One step: explicit Euler predictor with the current pressure gradient,
divergence of the predicted velocity as the Poisson source, pressure-change
solve, and correction of the face velocities by the gradient of that change.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cycles import NonConvergence
from .field import (PERIODIC, SYMMETRY, GridSpec, MacVelocity, ScalarField, apply_scalar_bc,
                    apply_velocity_bc, fixed_normal_faces)
from .metrics import RunMetrics


class StabilityWarning(UserWarning):
    """Explicit time-step limits are exceeded."""


@dataclass
class FluidState:
    vel: MacVelocity
    p: ScalarField
    t: float = 0.0
    dt: float = 1.0
    nu: float = 0.1
    steps: int = 0
    report: object = None

    @classmethod
    def at_rest(cls, spec: GridSpec, dt=1.0, nu=0.1):
        vel = apply_velocity_bc(MacVelocity.zeros(spec), spec)
        p = apply_scalar_bc(ScalarField.zeros(spec), spec, fixed_values=True)
        return cls(vel, p, 0.0, dt, nu)

    def copy(self):
        return FluidState(self.vel.copy(), self.p.copy(), self.t, self.dt, self.nu, self.steps,
                          self.report)


def divergence(vel: MacVelocity, spec: GridSpec) -> ScalarField:
    """Cell divergence from the four face velocities; ghost ring left at zero."""
    h = spec.h
    out = ScalarField.zeros(spec)
    out.values[1:-1, 1:-1] = ((vel.u[1:, 1:-1] - vel.u[:-1, 1:-1])
                              + (vel.v[1:-1, 1:] - vel.v[1:-1, :-1])) / h
    return out


def _extend_faces(a, spec, axis):
    """Add one mirrored/wrapped face layer on both ends of the normal axis."""
    lo_side, hi_side = ("W", "E") if axis == 0 else ("S", "N")
    a = np.moveaxis(a, axis, 0)
    ext = np.empty((a.shape[0] + 2,) + a.shape[1:], dtype=a.dtype)
    ext[1:-1] = a
    if spec.bc[lo_side].kind == PERIODIC:
        ext[0] = a[-2]
        ext[-1] = a[1]
    else:
        ext[0] = a[1] if spec.bc[lo_side].kind == SYMMETRY else a[0]
        ext[-1] = a[-2] if spec.bc[hi_side].kind == SYMMETRY else a[-1]
    return np.moveaxis(ext, 0, axis)


def predictor(state: FluidState, spec: GridSpec) -> MacVelocity:
    """Explicit predictor ``v + dt (-div(v v) + nu lap v - grad p)``.

    Advection is in conservative flux form with arithmetic face averages;
    all differences are second-order central. Velocity and pressure ghosts
    must be current.
    """
    ue = _extend_faces(state.vel.u, spec, 0)
    ve = _extend_faces(state.vel.v, spec, 1)
    out = state.vel.copy()
    _predict(state.vel.u, state.vel.v, ue, ve, state.p.values, float(state.dt),
             float(state.nu), float(spec.h), out.u, out.v)
    return apply_velocity_bc(out, spec)


@njit(cache=True)
def _predict(u, v, ue, ve, p, dt, nu, h, ou, ov):
    nx = u.shape[0] - 1
    ny = v.shape[1] - 1
    ih = 1.0 / h
    ih2 = ih * ih
    # u faces: ue[k + 1] == u[k]
    for i in range(nx + 1):
        for j in range(1, ny + 1):
            ur = 0.5 * (ue[i + 1, j] + ue[i + 2, j])
            ul = 0.5 * (ue[i, j] + ue[i + 1, j])
            uvt = 0.25 * (u[i, j] + u[i, j + 1]) * (v[i, j] + v[i + 1, j])
            uvb = 0.25 * (u[i, j - 1] + u[i, j]) * (v[i, j - 1] + v[i + 1, j - 1])
            lap = (ue[i + 2, j] + ue[i, j] + u[i, j + 1] + u[i, j - 1] - 4.0 * u[i, j]) * ih2
            gp = (p[i + 1, j] - p[i, j]) * ih
            ou[i, j] = u[i, j] + dt * (-(ur * ur - ul * ul) * ih - (uvt - uvb) * ih
                                       + nu * lap - gp)
    # v faces: ve[:, k + 1] == v[:, k]
    for i in range(1, nx + 1):
        for j in range(ny + 1):
            vt = 0.5 * (ve[i, j + 1] + ve[i, j + 2])
            vb = 0.5 * (ve[i, j] + ve[i, j + 1])
            uvr = 0.25 * (u[i, j] + u[i, j + 1]) * (v[i, j] + v[i + 1, j])
            uvl = 0.25 * (u[i - 1, j] + u[i - 1, j + 1]) * (v[i - 1, j] + v[i, j])
            lap = (v[i + 1, j] + v[i - 1, j] + ve[i, j + 2] + ve[i, j] - 4.0 * v[i, j]) * ih2
            gp = (p[i, j + 1] - p[i, j]) * ih
            ov[i, j] = v[i, j] + dt * (-(uvr - uvl) * ih - (vt * vt - vb * vb) * ih
                                       + nu * lap - gp)


def correct(v_star: MacVelocity, dp: ScalarField, dt, spec: GridSpec) -> MacVelocity:
    """Subtract ``dt * grad(dp)`` on every face not prescribed by a wall."""
    h = spec.h
    d = dp.values
    mu, mv = fixed_normal_faces(spec)
    out = v_star.copy()
    out.u[:, 1:-1] -= dt * (d[1:, 1:-1] - d[:-1, 1:-1]) / h
    out.v[1:-1, :] -= dt * (d[1:-1, 1:] - d[1:-1, :-1]) / h
    out.u[mu] = v_star.u[mu]
    out.v[mv] = v_star.v[mv]
    return apply_velocity_bc(out, spec)


def _check_limits(state, spec):
    vmax = max(np.abs(state.vel.u).max(), np.abs(state.vel.v).max())
    cfl = state.dt * vmax / spec.h
    diff = state.dt * state.nu * 4.0 / spec.h ** 2
    if cfl > 0.5 or diff > 0.5:
        warnings.warn(f"explicit limits exceeded: advective number {cfl:.3g}, "
                      f"diffusive number {diff:.3g}", StabilityWarning, stacklevel=3)


def step(state: FluidState, spec: GridSpec, solver, metrics=None, accept_nonconverged=False):
    """Advance one timestep; the solver's report is attached to the new state.

    ``solver`` is anything with ``solve(rhs, metrics) -> (dp, report)``.
    NonConvergence propagates unless ``accept_nonconverged`` is set, in
    which case the capped iterate is used.
    """
    metrics = RunMetrics() if metrics is None else metrics
    cur = state.copy()
    apply_velocity_bc(cur.vel, spec)
    apply_scalar_bc(cur.p, spec, fixed_values=True)
    if state.dt == 0:
        metrics.close_timestep(0.0)
        cur.steps += 1
        cur.report = None
        return cur
    _check_limits(cur, spec)

    v_star = predictor(cur, spec)
    rhs = divergence(v_star, spec).interior * (spec.h ** 2 / cur.dt)
    try:
        dp_int, report = solver.solve(rhs, metrics)
    except NonConvergence as exc:
        if not accept_nonconverged:
            metrics.close_timestep(exc.final_residual)
            raise
        dp_int, report = exc.solution, exc.report
    metrics.close_timestep(report.residual_final)

    dp = apply_scalar_bc(ScalarField.from_interior(dp_int, spec), spec)
    vel = correct(v_star, dp, cur.dt, spec)
    p = cur.p.copy()
    p.values[1:-1, 1:-1] += dp_int
    apply_scalar_bc(p, spec, fixed_values=True)
    return FluidState(vel, p, cur.t + cur.dt, cur.dt, cur.nu, cur.steps + 1, report)


def kinetic_energy(vel: MacVelocity, spec: GridSpec) -> float:
    """``0.5 * sum(u^2 + v^2) h^2`` over distinct faces (periodic duplicates dropped)."""
    u = vel.u[:-1, 1:-1] if spec.periodic_x else vel.u[:, 1:-1]
    v = vel.v[1:-1, :-1] if spec.periodic_y else vel.v[1:-1, :]
    return 0.5 * float((u ** 2).sum() + (v ** 2).sum()) * spec.h ** 2


def max_divergence(vel: MacVelocity, spec: GridSpec) -> float:
    return float(np.abs(divergence(vel, spec).interior).max())
