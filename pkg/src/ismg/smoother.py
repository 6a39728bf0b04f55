"""Stencil operators, residuals and Gauss-Seidel sweeps.

All operators are in flux form: a row reads ``sum_nb c_nb * x_nb + c_C * x_C``
with unit neighbour weights for a uniform fine grid (the ``h**2`` factor is
folded into the right-hand side). Solver arrays hold interior cells only;
boundary closures live in the coefficients, so no ghost cells are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .field import DIRICHLET, PERIODIC, GridSpec

# 9-point slot order used for CSV dumps; coefficients are stored as
# coeffs[i, j, di + 1, dj + 1]
NINE_POINT_ORDER = (("C", 0, 0), ("E", 1, 0), ("W", -1, 0), ("N", 0, 1), ("S", 0, -1),
                    ("NE", 1, 1), ("NW", -1, 1), ("SE", 1, -1), ("SW", -1, -1))


class SingularRowError(ArithmeticError):
    """A stencil row has a zero diagonal coefficient."""


class FivePointStencil:
    """Variable-coefficient five-point operator on an ``(nx, ny)`` cell array."""

    points = 5

    def __init__(self, cw, ce, cs, cn, cc, periodic=(False, False)):
        self.cw, self.ce, self.cs, self.cn, self.cc = (
            np.ascontiguousarray(a, dtype=np.float64) for a in (cw, ce, cs, cn, cc))
        self.periodic = (bool(periodic[0]), bool(periodic[1]))
        self._interior_constants()

    def _interior_constants(self):
        """Detect constant interior coefficients (true on fine and agglomerated levels)."""
        self.uniform = False
        self.a = self.d = 0.0
        nx, ny = self.cc.shape
        if nx < 3 or ny < 3:
            return
        inner = (slice(1, -1), slice(1, -1))
        a = self.cw[1, 1]
        if all(np.all(c[inner] == a) for c in (self.cw, self.ce, self.cs, self.cn)) \
                and np.all(self.cc[inner] == self.cc[1, 1]) and self.cc[1, 1] != 0.0:
            self.uniform = True
            self.a, self.d = float(a), float(self.cc[1, 1])

    @classmethod
    def from_grid(cls, spec: GridSpec):
        """Fine pressure operator with the grid's boundary closures."""
        nx, ny = spec.nx, spec.ny
        kinds = spec.pressure_kinds
        cw = np.ones((nx, ny))
        ce = np.ones((nx, ny))
        cs = np.ones((nx, ny))
        cn = np.ones((nx, ny))
        cc = np.zeros((nx, ny))
        for arr, side, idx in ((cw, "W", (0, slice(None))), (ce, "E", (-1, slice(None))),
                               (cs, "S", (slice(None), 0)), (cn, "N", (slice(None), -1))):
            if kinds[side] == PERIODIC:
                continue
            arr[idx] = 0.0
            if kinds[side] == DIRICHLET:
                # ghost = -x_C, so the face flux is -2 x_C
                cc[idx] -= 2.0
        cc -= cw + ce + cs + cn
        return cls(cw, ce, cs, cn, cc, (spec.periodic_x, spec.periodic_y))

    @property
    def shape(self):
        return self.cc.shape

    @property
    def cells(self):
        return self.cc.size

    def check(self):
        if np.any(self.cc == 0.0):
            i, j = np.argwhere(self.cc == 0.0)[0]
            raise SingularRowError(f"zero diagonal at cell ({i}, {j})")

    def apply(self, x):
        out = np.empty_like(self.cc)
        _apply5(x.astype(np.float64, copy=False), self.cw, self.ce, self.cs, self.cn, self.cc,
                self.periodic[0], self.periodic[1], out)
        return out

    def row_sums(self):
        return self.cw + self.ce + self.cs + self.cn + self.cc

    def to_nine_point(self):
        """The same operator in the per-cell nine-point layout (corners zero)."""
        c = np.zeros(self.shape + (3, 3))
        c[:, :, 1, 1] = self.cc
        c[:, :, 0, 1] = self.cw
        c[:, :, 2, 1] = self.ce
        c[:, :, 1, 0] = self.cs
        c[:, :, 1, 2] = self.cn
        return NinePointStencil(c, self.periodic, points=5)

    def to_sparse(self):
        import scipy.sparse as sp

        nx, ny = self.shape
        idx = np.arange(nx * ny).reshape(nx, ny)
        rows, cols, vals = [idx.ravel()], [idx.ravel()], [self.cc.ravel()]
        for coef, di, dj in ((self.cw, -1, 0), (self.ce, 1, 0), (self.cs, 0, -1), (self.cn, 0, 1)):
            ii, jj = np.meshgrid(np.arange(nx) + di, np.arange(ny) + dj, indexing="ij")
            if self.periodic[0]:
                ii %= nx
            if self.periodic[1]:
                jj %= ny
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny) & (coef != 0)
            rows.append(idx[ok])
            cols.append(idx[ii[ok], jj[ok]])
            vals.append(coef[ok])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(nx * ny, nx * ny))


class NinePointStencil:
    """Per-cell nine-point operator, ``coeffs`` of shape ``(nx, ny, 3, 3)``.

    ``points`` is the nominal stencil width used for cost accounting; a
    five-point operator stored in this layout (corners zero) keeps 5.
    """

    def __init__(self, coeffs, periodic=(False, False), points=9):
        self.coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        self.periodic = (bool(periodic[0]), bool(periodic[1]))
        self.points = points

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    @property
    def cells(self):
        return self.shape[0] * self.shape[1]

    @property
    def cc(self):
        return self.coeffs[:, :, 1, 1]

    def check(self):
        if np.any(self.cc == 0.0):
            i, j = np.argwhere(self.cc == 0.0)[0]
            raise SingularRowError(f"zero diagonal at coarse cell ({i}, {j})")

    def apply(self, x):
        out = np.empty(self.shape)
        _apply9(x.astype(np.float64, copy=False), self.coeffs, self.periodic[0], self.periodic[1], out)
        return out

    def row_sums(self):
        return self.coeffs.sum(axis=(2, 3))

    def to_sparse(self):
        import scipy.sparse as sp

        nx, ny = self.shape
        idx = np.arange(nx * ny).reshape(nx, ny)
        rows, cols, vals = [], [], []
        for _, di, dj in NINE_POINT_ORDER:
            coef = self.coeffs[:, :, di + 1, dj + 1]
            ii, jj = np.meshgrid(np.arange(nx) + di, np.arange(ny) + dj, indexing="ij")
            if self.periodic[0]:
                ii %= nx
            if self.periodic[1]:
                jj %= ny
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny) & (coef != 0)
            rows.append(idx[ok])
            cols.append(idx[ii[ok], jj[ok]])
            vals.append(coef[ok])
        # duplicate (row, col) pairs are summed, which is what wraparound on
        # two-cell periodic axes needs
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(nx * ny, nx * ny))


@dataclass
class LinearStage:
    """One level's linear system and its iterate, with sweep/sync counters."""

    stencil: object
    rhs: np.ndarray
    x: np.ndarray
    sync_cost_per_sweep: int = 2
    sweeps: int = 0
    syncs: int = 0

    def __post_init__(self):
        if self.rhs.shape != self.x.shape or self.rhs.shape != tuple(self.stencil.shape):
            raise ValueError(f"rhs {self.rhs.shape}, iterate {self.x.shape} and stencil "
                             f"{tuple(self.stencil.shape)} extents differ")


def residual(stage: LinearStage):
    """Return ``(rhs - A x, max |rhs - A x|)``."""
    r = np.empty(stage.rhs.shape)
    st = stage.stencil
    if isinstance(st, FivePointStencil):
        m = _residual5(stage.x, stage.rhs, st.cw, st.ce, st.cs, st.cn, st.cc,
                       st.periodic[0], st.periodic[1], r)
    else:
        m = _residual9(stage.x, stage.rhs, st.coeffs, st.periodic[0], st.periodic[1], r)
    return r, m


def residual_max(stage: LinearStage) -> float:
    return residual(stage)[1]


def rbgs_sweep(stage: LinearStage):
    """One red-black Gauss-Seidel sweep: even ``(i + j)`` cells, then odd."""
    st = stage.stencil
    if not isinstance(st, FivePointStencil):
        raise TypeError("red-black sweeps need a five-point stencil")
    st.check()
    for color in (0, 1):
        _rb_half5(stage.x, stage.rhs, st.cw, st.ce, st.cs, st.cn, st.cc,
                  st.periodic[0], st.periodic[1], color, st.uniform, st.a, st.d)
    stage.sweeps += 1
    stage.syncs += stage.sync_cost_per_sweep
    return stage


def rbgs_sweep_max_residual(stage: LinearStage) -> float:
    """Red-black sweep followed by the max residual, without forming ``r``.

    Right after the black half-sweep every black residual is zero up to
    round-off, so only red cells are evaluated (unless an odd periodic extent
    breaks the two-colouring).
    """
    rbgs_sweep(stage)
    st = stage.stencil
    nx, ny = st.shape
    if (st.periodic[0] and nx % 2) or (st.periodic[1] and ny % 2):
        # an odd periodic extent pairs same-colour neighbours across the seam
        return residual(stage)[1]
    return _red_residual_max5(stage.x, stage.rhs, st.cw, st.ce, st.cs, st.cn, st.cc,
                              st.periodic[0], st.periodic[1], st.uniform, st.a, st.d)


def gs_sweep_coarse(stage: LinearStage):
    """One lexicographic Gauss-Seidel sweep over a nine-point coarse system."""
    st = stage.stencil
    st.check()
    _gs_lex9(stage.x, stage.rhs, st.coeffs, st.periodic[0], st.periodic[1])
    stage.sweeps += 1
    stage.syncs += stage.sync_cost_per_sweep
    return stage


# --- kernels --------------------------------------------------------------

@njit(cache=True)
def _nb(k, n, periodic):
    if k < 0:
        return k + n if periodic else -1
    if k >= n:
        return k - n if periodic else -1
    return k


@njit(cache=True)
def _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py):
    s = 0.0
    k = _nb(i - 1, nx, px)
    if k >= 0:
        s += cw[i, j] * x[k, j]
    k = _nb(i + 1, nx, px)
    if k >= 0:
        s += ce[i, j] * x[k, j]
    k = _nb(j - 1, ny, py)
    if k >= 0:
        s += cs[i, j] * x[i, k]
    k = _nb(j + 1, ny, py)
    if k >= 0:
        s += cn[i, j] * x[i, k]
    return s


@njit(cache=True)
def _on_border(i, j, nx, ny):
    return i == 0 or j == 0 or i == nx - 1 or j == ny - 1


@njit(cache=True)
def _rb_half5(x, b, cw, ce, cs, cn, cc, px, py, color, uniform, a, d):
    nx, ny = b.shape
    for i in range(nx):
        if i == 0 or i == nx - 1:
            for j in range((i + color) & 1, ny, 2):
                s = _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py)
                x[i, j] = (b[i, j] - s) / cc[i, j]
            continue
        j0 = (i + color) & 1
        if j0 == 0:
            s = _offdiag5(x, cw, ce, cs, cn, i, 0, nx, ny, px, py)
            x[i, 0] = (b[i, 0] - s) / cc[i, 0]
            j0 = 2
        # interior fast path, no wraparound checks
        if uniform:
            for j in range(j0, ny - 1, 2):
                s = a * (x[i - 1, j] + x[i + 1, j] + x[i, j - 1] + x[i, j + 1])
                x[i, j] = (b[i, j] - s) / d
        else:
            for j in range(j0, ny - 1, 2):
                s = (cw[i, j] * x[i - 1, j] + ce[i, j] * x[i + 1, j]
                     + cs[i, j] * x[i, j - 1] + cn[i, j] * x[i, j + 1])
                x[i, j] = (b[i, j] - s) / cc[i, j]
        j = ny - 1
        if ((i + j) & 1) == color and ny > 1:
            s = _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py)
            x[i, j] = (b[i, j] - s) / cc[i, j]


@njit(cache=True)
def _red_residual_max5(x, b, cw, ce, cs, cn, cc, px, py, uniform, a, d):
    nx, ny = b.shape
    m = 0.0
    for i in range(nx):
        for j in range(i & 1, ny, 2):
            if uniform and not _on_border(i, j, nx, ny):
                r = b[i, j] - d * x[i, j] - a * (x[i - 1, j] + x[i + 1, j]
                                                 + x[i, j - 1] + x[i, j + 1])
            else:
                r = (b[i, j] - cc[i, j] * x[i, j]
                     - _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py))
            if abs(r) > m:
                m = abs(r)
    return m


@njit(cache=True)
def _apply5(x, cw, ce, cs, cn, cc, px, py, out):
    nx, ny = cc.shape
    for i in range(nx):
        for j in range(ny):
            if _on_border(i, j, nx, ny):
                s = _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py)
            else:
                s = (cw[i, j] * x[i - 1, j] + ce[i, j] * x[i + 1, j]
                     + cs[i, j] * x[i, j - 1] + cn[i, j] * x[i, j + 1])
            out[i, j] = cc[i, j] * x[i, j] + s


@njit(cache=True)
def _residual5(x, b, cw, ce, cs, cn, cc, px, py, out):
    nx, ny = cc.shape
    m = 0.0
    for i in range(nx):
        for j in range(ny):
            if _on_border(i, j, nx, ny):
                s = _offdiag5(x, cw, ce, cs, cn, i, j, nx, ny, px, py)
            else:
                s = (cw[i, j] * x[i - 1, j] + ce[i, j] * x[i + 1, j]
                     + cs[i, j] * x[i, j - 1] + cn[i, j] * x[i, j + 1])
            r = b[i, j] - cc[i, j] * x[i, j] - s
            out[i, j] = r
            if abs(r) > m:
                m = abs(r)
    return m


@njit(cache=True)
def _offdiag9(x, c, i, j, nx, ny, px, py):
    s = 0.0
    for di in range(-1, 2):
        k = _nb(i + di, nx, px)
        if k < 0:
            continue
        for dj in range(-1, 2):
            if di == 0 and dj == 0:
                continue
            w = c[i, j, di + 1, dj + 1]
            if w == 0.0:
                continue
            l = _nb(j + dj, ny, py)
            if l >= 0:
                s += w * x[k, l]
    return s


@njit(cache=True)
def _gs_lex9(x, b, c, px, py):
    nx, ny = b.shape
    for i in range(nx):
        for j in range(ny):
            s = _offdiag9(x, c, i, j, nx, ny, px, py)
            x[i, j] = (b[i, j] - s) / c[i, j, 1, 1]


@njit(cache=True)
def _apply9(x, c, px, py, out):
    nx, ny = out.shape
    for i in range(nx):
        for j in range(ny):
            out[i, j] = c[i, j, 1, 1] * x[i, j] + _offdiag9(x, c, i, j, nx, ny, px, py)


@njit(cache=True)
def _residual9(x, b, c, px, py, out):
    nx, ny = b.shape
    m = 0.0
    for i in range(nx):
        for j in range(ny):
            r = b[i, j] - c[i, j, 1, 1] * x[i, j] - _offdiag9(x, c, i, j, nx, ny, px, py)
            out[i, j] = r
            if abs(r) > m:
                m = abs(r)
    return m
