"""Grid geometry, ghost-ring fields, boundary conditions and tile padding.

Index convention: arrays are indexed ``[i, j]`` with ``i`` along x and ``j``
along y. Cell-centred fields carry one ghost ring, so interior cells are
``values[1:-1, 1:-1]``. On the staggered grid ``u[i, j]`` sits on the vertical
face at ``x = i*h`` (``i = 0..nx``) and ``v[i, j]`` on the horizontal face at
``y = j*h`` (``j = 0..ny``); the transverse index of both includes ghosts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIDES = ("W", "E", "S", "N")

WALL = "wall"
SYMMETRY = "symmetry"
PERIODIC = "periodic"
INLET = "inlet"

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


class ConfigurationError(ValueError):
    """Raised for inconsistent geometry, boundary or solver settings."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition for one side of the domain.

    ``u_wall``/``v_wall`` are the x/y velocity components of a moving wall.
    An inlet is a no-slip wall whose normal faces in
    ``[start, start + width)`` carry the inflow speed ``v_inflow`` (positive
    means into the domain). A non-zero ``period`` repeats that span every
    ``period`` cells along the side.
    """

    kind: str
    u_wall: float = 0.0
    v_wall: float = 0.0
    p_wall: float = 0.0
    v_inflow: float = 0.0
    start: int = 0
    width: int = 0
    period: int = 0

    @classmethod
    def wall(cls, u=0.0, v=0.0):
        return cls(WALL, u_wall=float(u), v_wall=float(v))

    @classmethod
    def symmetry(cls, p=0.0):
        return cls(SYMMETRY, p_wall=float(p))

    @classmethod
    def periodic(cls):
        return cls(PERIODIC)

    @classmethod
    def inlet(cls, v_inflow, start, width, period=0):
        return cls(INLET, v_inflow=float(v_inflow), start=int(start), width=int(width),
                   period=int(period))

    def inlet_mask(self, length):
        """Boolean mask of the inflow faces along a side of ``length`` cells."""
        m = np.zeros(length, dtype=bool)
        if self.kind != INLET:
            return m
        starts = [self.start] if self.period <= 0 else range(self.start, length, self.period)
        for s in starts:
            m[s:min(s + self.width, length)] = True
        return m

    @property
    def pressure_kind(self) -> str:
        if self.kind == PERIODIC:
            return PERIODIC
        if self.kind == SYMMETRY:
            return DIRICHLET
        return NEUMANN


@dataclass
class GridSpec:
    """Fine-grid geometry, restriction tile and per-side boundary conditions."""

    nx: int
    ny: int
    h: float = 1.0
    tile: int = 16
    bc: dict = field(default_factory=lambda: {s: BoundaryCondition.wall() for s in SIDES})
    dtype: type = np.float64

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError(f"grid extents must be positive, got {self.nx}x{self.ny}")
        if self.h <= 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.h}")
        if self.tile < 1:
            raise ConfigurationError(f"tile must be >= 1, got {self.tile}")
        missing = set(SIDES) - set(self.bc)
        if missing:
            raise ConfigurationError(f"missing boundary conditions for sides {sorted(missing)}")
        for a, b in (("W", "E"), ("S", "N")):
            if (self.bc[a].kind == PERIODIC) != (self.bc[b].kind == PERIODIC):
                raise ConfigurationError(f"periodic boundary on {a}/{b} must be paired")
        for side, bc in self.bc.items():
            if bc.kind == INLET:
                length = self.ny if side in "WE" else self.nx
                if bc.period and bc.period <= bc.width:
                    raise ConfigurationError(
                        f"inlet period {bc.period} on side {side} must exceed its width {bc.width}")
                if bc.width < 1 or bc.start < 0 or bc.start + bc.width > length:
                    raise ConfigurationError(
                        f"inlet on side {side} spans [{bc.start}, {bc.start + bc.width}) "
                        f"outside side length {length}")
        self.dtype = np.dtype(self.dtype).type

    @property
    def periodic_x(self) -> bool:
        return self.bc["W"].kind == PERIODIC

    @property
    def periodic_y(self) -> bool:
        return self.bc["S"].kind == PERIODIC

    @property
    def pressure_kinds(self) -> dict:
        return {s: self.bc[s].pressure_kind for s in SIDES}

    @property
    def singular(self) -> bool:
        """True when the pressure problem has no Dirichlet anchor."""
        return all(k != DIRICHLET for k in self.pressure_kinds.values())

    def with_tile(self, tile):
        return GridSpec(self.nx, self.ny, self.h, tile, dict(self.bc), self.dtype)


def padded_dims(spec: GridSpec):
    """Tile-aligned extents and the interior width/height of the last tile.

    >>> padded_dims(GridSpec(500, 500, tile=16))
    (512, 512, 4, 4)
    """
    t = spec.tile
    px = math.ceil(spec.nx / t) * t
    py = math.ceil(spec.ny / t) * t
    return px, py, spec.nx - (px - t), spec.ny - (py - t)


def tile_extents(n: int, tile: int) -> np.ndarray:
    """Interior cell count of every tile along one axis; the last may be short."""
    nc = math.ceil(n / tile)
    w = np.full(nc, tile, dtype=np.int64)
    w[-1] = n - (nc - 1) * tile
    return w


@dataclass
class ScalarField:
    """Cell-centred scalar with a one-cell ghost ring."""

    values: np.ndarray

    @classmethod
    def zeros(cls, spec: GridSpec):
        return cls(np.zeros((spec.nx + 2, spec.ny + 2), dtype=spec.dtype))

    @classmethod
    def from_interior(cls, interior, spec: GridSpec):
        f = cls.zeros(spec)
        f.values[1:-1, 1:-1] = interior
        return f

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def copy(self):
        return ScalarField(self.values.copy())


@dataclass
class MacVelocity:
    """Staggered face velocities ``u`` (nx+1, ny+2) and ``v`` (nx+2, ny+1)."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, spec: GridSpec):
        return cls(np.zeros((spec.nx + 1, spec.ny + 2), dtype=spec.dtype),
                   np.zeros((spec.nx + 2, spec.ny + 1), dtype=spec.dtype))

    def copy(self):
        return MacVelocity(self.u.copy(), self.v.copy())

    def cell_centered(self):
        """Velocity components averaged to cell centres, shape (nx, ny)."""
        uc = 0.5 * (self.u[:-1, 1:-1] + self.u[1:, 1:-1])
        vc = 0.5 * (self.v[1:-1, :-1] + self.v[1:-1, 1:])
        return uc, vc


def _check_scalar(field_, spec):
    if field_.values.shape != (spec.nx + 2, spec.ny + 2):
        raise ConfigurationError(
            f"scalar field shape {field_.values.shape} does not match grid "
            f"{spec.nx}x{spec.ny} with ghost ring")


def _check_velocity(vel, spec):
    if vel.u.shape != (spec.nx + 1, spec.ny + 2) or vel.v.shape != (spec.nx + 2, spec.ny + 1):
        raise ConfigurationError(
            f"velocity shapes {vel.u.shape}, {vel.v.shape} do not match grid {spec.nx}x{spec.ny}")


def apply_scalar_bc(field_: ScalarField, spec: GridSpec, kinds=None, fixed_values=False):
    """Fill the ghost ring of a pressure-like field in place.

    ``kinds`` maps sides to ``"neumann"``, ``"dirichlet"`` or ``"periodic"``
    and defaults to the closures implied by ``spec``. Dirichlet ghosts are
    set so that the face value (linear interpolation) is zero, or the side's
    ``p_wall`` when ``fixed_values`` is true.
    """
    _check_scalar(field_, spec)
    kinds = spec.pressure_kinds if kinds is None else {**spec.pressure_kinds, **kinds}
    p = field_.values

    def face_value(side):
        return spec.bc[side].p_wall if fixed_values else 0.0

    # x sides first; y sides afterwards also fill the corners
    for side, ghost, inner, wrap in (("W", 0, 1, -2), ("E", -1, -2, 1)):
        k = kinds[side]
        if k == PERIODIC:
            p[ghost, 1:-1] = p[wrap, 1:-1]
        elif k == DIRICHLET:
            p[ghost, 1:-1] = 2.0 * face_value(side) - p[inner, 1:-1]
        else:
            p[ghost, 1:-1] = p[inner, 1:-1]
    for side, ghost, inner, wrap in (("S", 0, 1, -2), ("N", -1, -2, 1)):
        k = kinds[side]
        if k == PERIODIC:
            p[:, ghost] = p[:, wrap]
        elif k == DIRICHLET:
            p[:, ghost] = 2.0 * face_value(side) - p[:, inner]
        else:
            p[:, ghost] = p[:, inner]
    return field_


def apply_velocity_bc(vel: MacVelocity, spec: GridSpec):
    """Set prescribed normal faces and tangential ghosts in place.

    Walls fix the normal face to the wall's normal speed and choose the
    tangential ghost so the linearly interpolated wall value equals the wall's
    tangential speed. Symmetry sides mirror the tangential component and leave
    the normal face free (it is advanced by the predictor). Inlets are no-slip
    walls with the inflow speed on their span of normal faces.
    """
    _check_velocity(vel, spec)
    u, v = vel.u, vel.v
    # normal faces first, so that the tangential ghosts below see final values
    for side, nf, sgn in (("W", 0, 1.0), ("E", -1, -1.0)):
        bc = spec.bc[side]
        if bc.kind == PERIODIC and side == "W":
            u[-1, :] = u[0, :]
        elif bc.kind in (WALL, INLET):
            u[nf, 1:-1] = bc.u_wall
            if bc.kind == INLET:
                u[nf, 1:-1][bc.inlet_mask(spec.ny)] = sgn * bc.v_inflow
    for side, nf, sgn in (("S", 0, 1.0), ("N", -1, -1.0)):
        bc = spec.bc[side]
        if bc.kind == PERIODIC and side == "S":
            v[:, -1] = v[:, 0]
        elif bc.kind in (WALL, INLET):
            v[1:-1, nf] = bc.v_wall
            if bc.kind == INLET:
                v[1:-1, nf][bc.inlet_mask(spec.nx)] = sgn * bc.v_inflow
    # tangential ghosts: v columns on W/E, u rows on S/N
    for side, g, inner, wrap in (("W", 0, 1, -2), ("E", -1, -2, 1)):
        bc = spec.bc[side]
        if bc.kind == PERIODIC:
            v[g, :] = v[wrap, :]
        elif bc.kind == SYMMETRY:
            v[g, :] = v[inner, :]
        else:
            v[g, :] = 2.0 * bc.v_wall - v[inner, :]
    for side, g, inner, wrap in (("S", 0, 1, -2), ("N", -1, -2, 1)):
        bc = spec.bc[side]
        if bc.kind == PERIODIC:
            u[:, g] = u[:, wrap]
        elif bc.kind == SYMMETRY:
            u[:, g] = u[:, inner]
        else:
            u[:, g] = 2.0 * bc.u_wall - u[:, inner]
    return vel


def fixed_normal_faces(spec: GridSpec):
    """Boolean masks of u and v faces whose value is prescribed by a wall."""
    mu = np.zeros((spec.nx + 1, spec.ny + 2), dtype=bool)
    mv = np.zeros((spec.nx + 2, spec.ny + 1), dtype=bool)
    for side, idx in (("W", 0), ("E", -1)):
        if spec.bc[side].kind in (WALL, INLET):
            mu[idx, :] = True
    for side, idx in (("S", 0), ("N", -1)):
        if spec.bc[side].kind in (WALL, INLET):
            mv[:, idx] = True
    return mu, mv


def write_vtk(path, spec: GridSpec, p: ScalarField, vel: MacVelocity, title="ismg snapshot"):
    """Write cell-centre pressure and velocity as an ASCII legacy structured grid."""
    path = Path(path)
    uc, vc = vel.cell_centered()
    x = (np.arange(spec.nx) + 0.5) * spec.h
    y = (np.arange(spec.ny) + 0.5) * spec.h
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {spec.nx} {spec.ny} 1", f"POINTS {spec.nx * spec.ny} double"]
    # VTK point order: x fastest
    for j in range(spec.ny):
        lines.extend(f"{xi:.9g} {y[j]:.9g} 0" for xi in x)
    lines.append(f"POINT_DATA {spec.nx * spec.ny}")
    lines.append("SCALARS p double 1")
    lines.append("LOOKUP_TABLE default")
    pi = p.interior
    for j in range(spec.ny):
        lines.append(" ".join(f"{val:.9g}" for val in pi[:, j]))
    lines.append("VECTORS velocity double")
    for j in range(spec.ny):
        lines.extend(f"{uc[i, j]:.9g} {vc[i, j]:.9g} 0" for i in range(spec.nx))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_field_csv(path, spec: GridSpec, values: np.ndarray):
    """Write an (nx, ny) cell array as flat CSV: ``nx,ny,h`` header, then one line per y row."""
    path = Path(path)
    values = np.asarray(values)
    if values.shape != (spec.nx, spec.ny):
        raise ConfigurationError(f"field shape {values.shape} is not {(spec.nx, spec.ny)}")
    with path.open("w") as fh:
        fh.write("nx,ny,h\n")
        fh.write(f"{spec.nx},{spec.ny},{spec.h!r}\n")
        for j in range(spec.ny):
            fh.write(",".join(repr(float(a)) for a in values[:, j]) + "\n")
    return path


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns ``(nx, ny, h, values)``."""
    with Path(path).open() as fh:
        header = fh.readline().strip()
        if header != "nx,ny,h":
            raise ConfigurationError(f"{path}: unexpected header {header!r}")
        nx, ny, h = fh.readline().strip().split(",")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    values = np.array(rows).T
    return int(nx), int(ny), float(h), values
