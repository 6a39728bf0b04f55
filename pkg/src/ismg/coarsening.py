"""Coarse operators and grid transfers.

Three constructions share one data layout:

* ISMG: fluxes of a bilinear interpolant of coarse-centre values, summed over
  the fine faces that make up each coarse face (nine-point rows);
* ACM: summation of fine equations over 2x2 blocks, repeated per level
  (five-point rows, piecewise-constant correction);
* GMG: the five-point flux stencil re-discretised at the coarse spacing.

Coarse cells are tiles of fine cells. When the grid is not a multiple of the
tile the last tile is short, and its centre sits in the middle of its true
interior extent, so interpolation rectangles next to it are shorter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import DIRICHLET, ConfigurationError, GridSpec, tile_extents
from .smoother import NINE_POINT_ORDER, FivePointStencil, NinePointStencil


# --- bilinear interpolation and its face derivatives ------------------------

def _check_rect(dx, dy):
    if not (np.all(np.asarray(dx) > 0) and np.all(np.asarray(dy) > 0)):
        raise ConfigurationError(f"interpolation rectangle must have positive extents, got {dx} x {dy}")


def bilinear_weights(x, y, dx, dy):
    """Weights of (Q11, Q21, Q12, Q22) at offset ``(x, y)`` from the Q11 corner."""
    _check_rect(dx, dy)
    a = 1.0 / (dx * dy)
    return (a * (dx - x) * (dy - y), a * x * (dy - y), a * (dx - x) * y, a * x * y)


def flux_x_weights(y, dx, dy):
    """Weights of (Q11, Q21, Q12, Q22) in dp/dx on a vertical face at height ``y``."""
    _check_rect(dx, dy)
    a = 1.0 / (dx * dy)
    return (-a * (dy - y), a * (dy - y), -a * y, a * y)


def flux_y_weights(x, dx, dy):
    """Weights of (Q11, Q21, Q12, Q22) in dp/dy on a horizontal face at abscissa ``x``."""
    _check_rect(dx, dy)
    a = 1.0 / (dx * dy)
    return (-a * (dx - x), -a * x, a * (dx - x), a * x)


def bilinear_eval(q11, q21, q12, q22, x, y, dx, dy):
    """Bilinear interpolant of four corner values; ``(0, 0)`` is the Q11 corner.

    >>> bilinear_eval(0.0, 4.0, 8.0, 12.0, 1.0, 1.0, 2.0, 2.0)
    6.0
    """
    w = bilinear_weights(x, y, dx, dy)
    return w[0] * q11 + w[1] * q21 + w[2] * q12 + w[3] * q22


def face_flux_x(q11, q21, q12, q22, y, dx, dy):
    """x-derivative of the bilinear interpolant; independent of x."""
    w = flux_x_weights(y, dx, dy)
    return w[0] * q11 + w[1] * q21 + w[2] * q12 + w[3] * q22


def face_flux_y(q11, q21, q12, q22, x, dx, dy):
    """y-derivative of the bilinear interpolant; independent of y."""
    w = flux_y_weights(x, dx, dy)
    return w[0] * q11 + w[1] * q21 + w[2] * q12 + w[3] * q22


# --- one-dimensional tile geometry ----------------------------------------

class TileAxis:
    """Tile layout along one axis and the 1D interpolation brackets of fine cells.

    For every fine cell ``f`` the bracket is given relative to the coarse cell
    ``owner[f]`` containing it: the lower/upper interpolation nodes are
    ``owner + lo`` and ``owner + hi`` (wrapped on periodic axes), the cell
    centre lies ``offset`` above the lower node, and ``extent`` is the node
    distance. Beyond the outermost centres of a non-periodic axis the
    interpolant is constant (``lo == hi == 0``), except towards a Dirichlet
    end, where it falls linearly to zero at the boundary: the node on that
    side is the boundary itself (``wall_lo``/``wall_hi``) and carries no weight.
    """

    def __init__(self, n, tile, h, periodic, dirichlet=(False, False)):
        self.n, self.tile, self.h, self.periodic = n, tile, h, periodic
        self.widths = tile_extents(n, tile)
        self.nc = len(self.widths)
        self.starts = np.concatenate(([0], np.cumsum(self.widths)[:-1]))
        self.centers = (self.starts + 0.5 * self.widths) * h
        self.length = n * h
        if periodic and self.nc < 2:
            raise ConfigurationError(
                f"periodic axis of {n} cells needs at least 2 tiles of {tile}")

        f = np.arange(n)
        pos = (f + 0.5) * h
        owner = f // tile
        c = self.centers[owner]
        lo = np.zeros(n, dtype=np.int64)
        hi = np.zeros(n, dtype=np.int64)
        offset = np.zeros(n)
        extent = np.ones(n)
        wall_lo = np.zeros(n, dtype=bool)
        wall_hi = np.zeros(n, dtype=bool)
        for k in range(n):
            J = owner[k]
            if pos[k] >= c[k]:
                if J + 1 < self.nc or periodic:
                    hi[k] = 1
                    offset[k] = pos[k] - c[k]
                    extent[k] = self.gap(J)
                elif dirichlet[1]:
                    wall_hi[k] = True
                    offset[k] = pos[k] - c[k]
                    extent[k] = self.length - c[k]
            elif J > 0 or periodic:
                lo[k] = -1
                extent[k] = self.gap(J - 1)
                offset[k] = extent[k] - (c[k] - pos[k])
            elif dirichlet[0]:
                wall_lo[k] = True
                extent[k] = c[k]
                offset[k] = pos[k]
        self.owner, self.lo, self.hi, self.offset, self.extent = owner, lo, hi, offset, extent
        self.wall_lo, self.wall_hi = wall_lo, wall_hi

    def node_weights(self, f):
        """Linear weights of the lower and upper node for fine cells ``f`` (zero on a wall node)."""
        t = self.offset[f] / self.extent[f]
        return np.where(self.wall_lo[f], 0.0, 1.0 - t), np.where(self.wall_hi[f], 0.0, t)

    def gap(self, k):
        """Distance between the centres of coarse cells ``k`` and ``k + 1`` (wrapping)."""
        k = k % self.nc
        if k + 1 < self.nc:
            return self.centers[k + 1] - self.centers[k]
        return self.centers[0] + self.length - self.centers[k]

    def interior_faces(self):
        """Coarse cells whose upper face is shared with another coarse cell."""
        return np.arange(self.nc if self.periodic else self.nc - 1)

    def interpolation_matrix(self):
        """Dense (n, nc) matrix of 1D linear interpolation weights."""
        m = np.zeros((self.n, self.nc))
        rows = np.arange(self.n)
        wl, wh = self.node_weights(rows)
        np.add.at(m, (rows, (self.owner + self.lo) % self.nc), wl)
        np.add.at(m, (rows, (self.owner + self.hi) % self.nc), wh)
        return m


@dataclass
class CoarseOperator:
    """Coarse stencil rows plus the tile geometry they were built from."""

    ncx: int
    ncy: int
    coeffs: np.ndarray
    tile: int
    tile_w: np.ndarray
    tile_h: np.ndarray
    rect_dx: np.ndarray
    rect_dy: np.ndarray
    periodic: tuple
    points: int = 9
    kind: str = "ISMG"
    axes: tuple = field(default=None, repr=False)

    @property
    def stencil(self) -> NinePointStencil:
        return NinePointStencil(self.coeffs, self.periodic, self.points)

    def to_sparse(self):
        return self.stencil.to_sparse()

    def write_csv(self, path):
        """Dump rows as ``ci,cj,C,E,W,N,S,NE,NW,SE,SW``."""
        path = Path(path)
        with path.open("w") as fh:
            fh.write("ci,cj," + ",".join(name for name, _, _ in NINE_POINT_ORDER) + "\n")
            for ci in range(self.ncx):
                for cj in range(self.ncy):
                    vals = [self.coeffs[ci, cj, di + 1, dj + 1] for _, di, dj in NINE_POINT_ORDER]
                    fh.write(f"{ci},{cj}," + ",".join(repr(float(v)) for v in vals) + "\n")
        return path


@dataclass
class MgHierarchy:
    """Levels of a multigrid solver, finest first.

    ``levels`` holds stencils; ``coarse`` is the CoarseOperator of a two-level
    scheme (ISMG/GMG) and ``None`` for ACM.
    """

    scheme: str
    levels: list
    coarse: CoarseOperator = None
    tile: int = 2

    @property
    def depth(self):
        return len(self.levels)


# --- transfers --------------------------------------------------------------

def restrict_sum(fine, spec_or_tile):
    """Sum fine cells over each (possibly short) tile; no averaging."""
    tile = spec_or_tile.tile if isinstance(spec_or_tile, GridSpec) else int(spec_or_tile)
    fine = np.asarray(fine)
    nx, ny = fine.shape
    out = np.add.reduceat(fine, np.arange(0, nx, tile), axis=0)
    return np.add.reduceat(out, np.arange(0, ny, tile), axis=1)


def prolongate_constant(coarse, spec_or_tile, fine_shape=None):
    """Copy every coarse value onto all fine cells of its tile."""
    tile = spec_or_tile.tile if isinstance(spec_or_tile, GridSpec) else int(spec_or_tile)
    if fine_shape is None:
        fine_shape = (spec_or_tile.nx, spec_or_tile.ny)
    out = np.repeat(np.repeat(coarse, tile, axis=0), tile, axis=1)
    return out[:fine_shape[0], :fine_shape[1]]


def prolongate_bilinear(coarse, op: CoarseOperator, spec: GridSpec = None):
    """Bilinear interpolation of coarse-centre values to every fine cell centre."""
    ax, ay = op.axes
    px = ax.interpolation_matrix()
    py = ay.interpolation_matrix()
    return px @ np.asarray(coarse, dtype=np.float64) @ py.T


# --- operator construction ---------------------------------------------------

def _axes(spec: GridSpec, kinds):
    if spec.tile < 2:
        raise ConfigurationError(f"two-level coarsening needs tile >= 2, got {spec.tile}")
    d = {side: kinds[side] == DIRICHLET for side in kinds}
    ax = TileAxis(spec.nx, spec.tile, spec.h, spec.periodic_x, (d["W"], d["E"]))
    ay = TileAxis(spec.ny, spec.tile, spec.h, spec.periodic_y, (d["S"], d["N"]))
    # a single coarse cell along a wall-bounded axis is allowed: the
    # interpolant is then constant along it
    return ax, ay


def _gaps(axis):
    return np.array([axis.gap(k) for k in axis.interior_faces()])


def build_ismg_operator(spec: GridSpec, kinds=None) -> CoarseOperator:
    """Nine-point coarse rows from summed fine-face fluxes of the bilinear interpolant.

    Each fine face on a coarse face carries ``h * dp/dx`` (or ``dp/dy``) of the
    interpolant over the rectangle spanning the neighbouring coarse centres;
    it is added to the row on one side and subtracted from the row on the
    other. Dirichlet pressure sides contribute the fine closure ``-2 p`` of the
    interpolated boundary-cell value (the interpolant vanishes on such a side);
    Neumann sides contribute nothing.
    """
    kinds = spec.pressure_kinds if kinds is None else {**spec.pressure_kinds, **kinds}
    ax, ay = _axes(spec, kinds)
    h = spec.h
    c = np.zeros((ax.nc, ay.nc, 3, 3))

    # vertical coarse faces: east face of coarse column I, one entry per fine row j
    faces = ax.interior_faces()
    if len(faces):
        I = np.repeat(faces, ay.n)
        j = np.tile(np.arange(ay.n), len(faces))
        J = ay.owner[j]
        dx = np.repeat(_gaps(ax), ay.n)
        w = [h * wk for wk in flux_x_weights(ay.offset[j], dx, ay.extent[j])]
        keep_lo, keep_hi = ~ay.wall_lo[j], ~ay.wall_hi[j]
        w = [w[0] * keep_lo, w[1] * keep_lo, w[2] * keep_hi, w[3] * keep_hi]
        lo, hi = ay.lo[j] + 1, ay.hi[j] + 1
        Ie = (I + 1) % ax.nc
        # Q11=(I, lo) Q21=(I+1, lo) Q12=(I, hi) Q22=(I+1, hi)
        for wk, di, dj in ((w[0], 0, lo), (w[1], 1, lo), (w[2], 0, hi), (w[3], 1, hi)):
            np.add.at(c, (I, J, di + 1, dj), wk)
            np.add.at(c, (Ie, J, di, dj), -wk)

    faces = ay.interior_faces()
    if len(faces):
        J = np.repeat(faces, ax.n)
        i = np.tile(np.arange(ax.n), len(faces))
        I = ax.owner[i]
        dy = np.repeat(_gaps(ay), ax.n)
        w = [h * wk for wk in flux_y_weights(ax.offset[i], ax.extent[i], dy)]
        keep_lo, keep_hi = ~ax.wall_lo[i], ~ax.wall_hi[i]
        w = [w[0] * keep_lo, w[1] * keep_hi, w[2] * keep_lo, w[3] * keep_hi]
        lo, hi = ax.lo[i] + 1, ax.hi[i] + 1
        Jn = (J + 1) % ay.nc
        # Q11=(lo, J) Q21=(hi, J) Q12=(lo, J+1) Q22=(hi, J+1)
        for wk, di, dj in ((w[0], lo, 0), (w[1], hi, 0), (w[2], lo, 1), (w[3], hi, 1)):
            np.add.at(c, (I, J, di, dj + 1), wk)
            np.add.at(c, (I, Jn, di, dj), -wk)

    # Dirichlet closures: flux -2 p_interp(boundary cell) through the boundary face
    for side in ("W", "E", "S", "N"):
        if kinds[side] != DIRICHLET:
            continue
        if side in "WE":
            f = 0 if side == "W" else ax.n - 1
            along = np.arange(ay.n)
            bx = (ax.lo[f] + 1, ax.hi[f] + 1, ax.offset[f], ax.extent[f])
            I = np.full(ay.n, ax.owner[f])
            J = ay.owner[along]
            xl, xh = ax.node_weights(np.array([f]))
            yl, yh = ay.node_weights(along)
            wts = (xl * yl, xh * yl, xl * yh, xh * yh)
            slots = ((bx[0], ay.lo[along] + 1), (bx[1], ay.lo[along] + 1),
                     (bx[0], ay.hi[along] + 1), (bx[1], ay.hi[along] + 1))
        else:
            f = 0 if side == "S" else ay.n - 1
            along = np.arange(ax.n)
            by = (ay.lo[f] + 1, ay.hi[f] + 1, ay.offset[f], ay.extent[f])
            I = ax.owner[along]
            J = np.full(ax.n, ay.owner[f])
            xl, xh = ax.node_weights(along)
            yl, yh = ay.node_weights(np.array([f]))
            wts = (xl * yl, xh * yl, xl * yh, xh * yh)
            slots = ((ax.lo[along] + 1, by[0]), (ax.hi[along] + 1, by[0]),
                     (ax.lo[along] + 1, by[1]), (ax.hi[along] + 1, by[1]))
        for wk, (di, dj) in zip(wts, slots):
            np.add.at(c, (I, J, di, dj), -2.0 * wk)

    return CoarseOperator(ax.nc, ay.nc, c, spec.tile, ax.widths, ay.widths, _gaps(ax), _gaps(ay),
                          (spec.periodic_x, spec.periodic_y), 9, "ISMG", (ax, ay))


def build_gmg_operator(spec: GridSpec, kinds=None) -> CoarseOperator:
    """Five-point flux stencil at the coarse spacing: face length over centre distance."""
    kinds = spec.pressure_kinds if kinds is None else {**spec.pressure_kinds, **kinds}
    ax, ay = _axes(spec, kinds)
    h = spec.h
    c = np.zeros((ax.nc, ay.nc, 3, 3))
    for I in ax.interior_faces():
        Ie = (I + 1) % ax.nc
        w = ay.widths * h / ax.gap(I)
        c[I, :, 2, 1] += w
        c[Ie, :, 0, 1] += w
    for J in ay.interior_faces():
        Jn = (J + 1) % ay.nc
        w = ax.widths * h / ay.gap(J)
        c[:, J, 1, 2] += w
        c[:, Jn, 1, 0] += w
    c[:, :, 1, 1] = -c.sum(axis=(2, 3))
    # Dirichlet: zero value on the boundary, half a tile from the coarse centre
    if kinds["W"] == DIRICHLET:
        c[0, :, 1, 1] -= ay.widths / (0.5 * ax.widths[0])
    if kinds["E"] == DIRICHLET:
        c[-1, :, 1, 1] -= ay.widths / (0.5 * ax.widths[-1])
    if kinds["S"] == DIRICHLET:
        c[:, 0, 1, 1] -= ax.widths / (0.5 * ay.widths[0])
    if kinds["N"] == DIRICHLET:
        c[:, -1, 1, 1] -= ax.widths / (0.5 * ay.widths[-1])
    return CoarseOperator(ax.nc, ay.nc, c, spec.tile, ax.widths, ay.widths, _gaps(ax), _gaps(ay),
                          (spec.periodic_x, spec.periodic_y), 5, "GMG", (ax, ay))


def agglomerate(stencil: FivePointStencil, factor=2) -> FivePointStencil:
    """Sum fine rows over ``factor x factor`` blocks with piecewise-constant unknowns."""
    nx, ny = stencil.shape
    px, py = stencil.periodic
    bx, by = math.ceil(nx / factor), math.ceil(ny / factor)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    BI, BJ = ii // factor, jj // factor
    cc = np.zeros((bx, by))
    out = {"cw": np.zeros((bx, by)), "ce": np.zeros((bx, by)),
           "cs": np.zeros((bx, by)), "cn": np.zeros((bx, by))}
    np.add.at(cc, (BI, BJ), stencil.cc)
    for name, di, dj in (("cw", -1, 0), ("ce", 1, 0), ("cs", 0, -1), ("cn", 0, 1)):
        coef = getattr(stencil, name)
        ni, nj = ii + di, jj + dj
        if px:
            ni %= nx
        if py:
            nj %= ny
        ok = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny) & (coef != 0)
        same = ok & (ni // factor == BI) & (nj // factor == BJ)
        cross = ok & ~same
        np.add.at(cc, (BI[same], BJ[same]), coef[same])
        np.add.at(out[name], (BI[cross], BJ[cross]), coef[cross])
    return FivePointStencil(out["cw"], out["ce"], out["cs"], out["cn"], cc, (px, py))


def acm_level_shapes(spec: GridSpec, depth):
    return [(math.ceil(spec.nx / 2 ** k), math.ceil(spec.ny / 2 ** k)) for k in range(depth)]


def build_acm_hierarchy(spec: GridSpec, depth) -> MgHierarchy:
    """ACM levels with factor-2 agglomeration; coarsest spacing is ``2**(depth-1) h``."""
    if depth < 2:
        raise ConfigurationError(f"ACM needs depth >= 2, got {depth}")
    shapes = acm_level_shapes(spec, depth)
    if min(shapes[-1]) < 2:
        raise ConfigurationError(
            f"grid {spec.nx}x{spec.ny} is too small for ACM depth {depth} "
            f"(coarsest level {shapes[-1][0]}x{shapes[-1][1]})")
    levels = [FivePointStencil.from_grid(spec)]
    for _ in range(depth - 1):
        levels.append(agglomerate(levels[-1], 2))
    return MgHierarchy("ACM", levels, None, 2)


def build_two_level(spec: GridSpec, scheme) -> MgHierarchy:
    scheme = scheme.upper()
    if scheme == "ISMG":
        op = build_ismg_operator(spec)
    elif scheme == "GMG":
        op = build_gmg_operator(spec)
    else:
        raise ConfigurationError(f"unknown two-level scheme {scheme!r}")
    return MgHierarchy(scheme, [FivePointStencil.from_grid(spec), op.stencil], op, spec.tile)
