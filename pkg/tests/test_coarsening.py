import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BC_LAYOUTS, make_spec
from ismg.coarsening import (agglomerate, bilinear_eval, build_acm_hierarchy, build_gmg_operator,
                             build_ismg_operator, face_flux_x, face_flux_y, prolongate_bilinear,
                             prolongate_constant, restrict_sum)
from ismg.field import DIRICHLET, ConfigurationError, GridSpec, tile_extents
from ismg.smoother import FivePointStencil


# --- assembly oracles ---------------------------------------------------------

def interp_1d(n, tile, h, periodic, dirichlet=(False, False)):
    """Linear interpolation between tile centres, constant beyond the outer centres
    except towards a Dirichlet end, where it reaches zero on the boundary."""
    w = tile_extents(n, tile)
    starts = np.concatenate(([0], np.cumsum(w)[:-1]))
    centres = (starts + 0.5 * w) * h
    x = (np.arange(n) + 0.5) * h
    m = np.zeros((n, len(w)))
    for k in range(len(w)):
        e = np.zeros(len(w))
        e[k] = 1.0
        if periodic:
            m[:, k] = np.interp(x, centres, e, period=n * h)
            continue
        xp, fp = list(centres), list(e)
        if dirichlet[0]:
            xp, fp = [0.0] + xp, [0.0] + fp
        if dirichlet[1]:
            xp, fp = xp + [n * h], fp + [0.0]
        m[:, k] = np.interp(x, xp, fp)
    return m


def sum_1d(n, tile):
    r = np.zeros((len(tile_extents(n, tile)), n))
    r[np.arange(n) // tile, np.arange(n)] = 1.0
    return r


def galerkin(spec):
    """R A P with R tile summation and P bilinear interpolation, dense."""
    A = FivePointStencil.from_grid(spec).to_sparse().toarray()
    d = {side: kind == DIRICHLET for side, kind in spec.pressure_kinds.items()}
    P = np.kron(interp_1d(spec.nx, spec.tile, spec.h, spec.periodic_x, (d["W"], d["E"])),
                interp_1d(spec.ny, spec.tile, spec.h, spec.periodic_y, (d["S"], d["N"])))
    R = np.kron(sum_1d(spec.nx, spec.tile), sum_1d(spec.ny, spec.tile))
    return R @ A @ P


def galerkin_constant(A, shape, factor=2):
    nx, ny = shape
    R = np.kron(sum_1d(nx, factor), sum_1d(ny, factor))
    return R @ A @ R.T


# --- bilinear interpolation ----------------------------------------------------

def test_bilinear_eval_examples():
    assert bilinear_eval(0.0, 4.0, 8.0, 12.0, 1.0, 1.0, 2.0, 2.0) == 6.0
    assert bilinear_eval(3.0, 5.0, 7.0, 9.0, 0.0, 0.0, 1.5, 2.5) == 3.0


@given(st.floats(-10, 10), st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 5), st.floats(0.1, 5))
def test_bilinear_partition_of_unity(c, tx, ty, dx, dy):
    assert np.isclose(bilinear_eval(c, c, c, c, tx * dx, ty * dy, dx, dy), c)


def test_face_flux_examples():
    assert face_flux_x(0.0, 1.0, 0.0, 1.0, 0.3, 1.0, 1.0) == 1.0
    assert face_flux_x(0.0, 4.0, 8.0, 12.0, 0.5, 2.0, 2.0) == 2.0
    assert face_flux_x(2.0, 2.0, 2.0, 2.0, 0.7, 1.0, 3.0) == 0.0
    assert face_flux_y(0.0, 4.0, 8.0, 12.0, 0.5, 2.0, 2.0) == 4.0


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.05, 0.95),
       st.floats(0.05, 0.95), st.floats(0.5, 4), st.floats(0.5, 4))
def test_face_fluxes_are_derivatives(q, tx, ty, dx, dy):
    x, y, e = tx * dx, ty * dy, 1e-6
    num_x = (bilinear_eval(*q, x + e, y, dx, dy) - bilinear_eval(*q, x - e, y, dx, dy)) / (2 * e)
    num_y = (bilinear_eval(*q, x, y + e, dx, dy) - bilinear_eval(*q, x, y - e, dx, dy)) / (2 * e)
    assert np.isclose(face_flux_x(*q, y, dx, dy), num_x, atol=1e-6)
    assert np.isclose(face_flux_y(*q, x, dx, dy), num_y, atol=1e-6)


def test_non_positive_rectangle_rejected():
    with pytest.raises(ConfigurationError):
        bilinear_eval(0, 0, 0, 0, 0, 0, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        face_flux_y(0, 0, 0, 0, 0, 1.0, -1.0)


# --- ISMG operator --------------------------------------------------------------

GALERKIN_CASES = [(layout, nx, ny, tile)
                  for layout in ("walls", "open_top", "channel", "periodic")
                  for nx, ny in ((8, 8), (16, 16), (32, 32), (20, 12), (21, 13))
                  for tile in (2, 4, 8)
                  if not (BC_LAYOUTS[layout]["W"].kind == "periodic" and nx < 2 * tile)
                  and not (BC_LAYOUTS[layout]["S"].kind == "periodic" and ny < 2 * tile)]


@pytest.mark.parametrize("layout, nx, ny, tile", GALERKIN_CASES)
def test_ismg_equals_galerkin_product(layout, nx, ny, tile):
    spec = make_spec(nx, ny, tile=tile, layout=layout)
    got = build_ismg_operator(spec).to_sparse().toarray()
    want = galerkin(spec)
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_ismg_interior_row_is_rotation_symmetric():
    # per coarse face the bilinear weights sum to 1/8 on each diagonal neighbour
    # and 3/4 on the facing one, minus 1/8 from each of the two crossing faces
    for tile in (2, 4, 8, 16):
        c = build_ismg_operator(GridSpec(8 * tile, 8 * tile, 1.0, tile)).coeffs[3, 3]
        assert np.allclose(c, [[0.25, 0.5, 0.25], [0.5, -3.0, 0.5], [0.25, 0.5, 0.25]],
                           rtol=0, atol=1e-13)


@given(st.sampled_from(sorted(BC_LAYOUTS)), st.integers(16, 40), st.integers(16, 40),
       st.sampled_from([2, 4, 8]))
def test_ismg_row_sums_zero_away_from_dirichlet(layout, nx, ny, tile):
    spec = make_spec(nx, ny, tile=tile, layout=layout)
    op = build_ismg_operator(spec)
    sums = op.stencil.row_sums()
    kinds = spec.pressure_kinds
    mask = np.ones_like(sums, dtype=bool)
    # a Dirichlet closure reaches the boundary tile and, through the
    # interpolation bracket of its cells, the next one in
    for side, sl in (("W", np.s_[:2, :]), ("E", np.s_[-2:, :]),
                     ("S", np.s_[:, :2]), ("N", np.s_[:, -2:])):
        if kinds[side] == "dirichlet":
            mask[sl] = False
    assert np.abs(sums[mask]).max(initial=0.0) < 1e-12


@given(st.sampled_from(["walls", "periodic", "channel"]), st.integers(16, 36),
       st.integers(16, 36), st.sampled_from([2, 4, 8]))
def test_ismg_flux_antisymmetry_gives_zero_column_sums(layout, nx, ny, tile):
    # every face flux enters one row with + and its neighbour with -, so
    # without Dirichlet closures each column of the operator sums to zero
    spec = make_spec(nx, ny, tile=tile, layout=layout)
    if any(k == "dirichlet" for k in spec.pressure_kinds.values()):
        return
    A = build_ismg_operator(spec).to_sparse().toarray()
    assert np.abs(A.sum(axis=0)).max() < 1e-12


@given(st.sampled_from(sorted(BC_LAYOUTS)), st.integers(8, 30), st.integers(8, 30),
       st.sampled_from([2, 4]), st.integers(0, 2**31 - 1))
def test_ismg_conservation(layout, nx, ny, tile, seed):
    spec = make_spec(nx, ny, tile=tile, layout=layout)
    op = build_ismg_operator(spec)
    xc = np.random.default_rng(seed).standard_normal((op.ncx, op.ncy))
    fine = FivePointStencil.from_grid(spec).apply(prolongate_bilinear(xc, op))
    # sum of coarse rows = net boundary flux of the interpolated fine field
    assert np.isclose(op.stencil.apply(xc).sum(), fine.sum(), rtol=0, atol=1e-10)


def test_ismg_rejects_unit_tile():
    with pytest.raises(ConfigurationError):
        build_ismg_operator(GridSpec(8, 8, tile=1))


def test_coarse_operator_csv(tmp_path):
    op = build_ismg_operator(GridSpec(16, 16, tile=4))
    lines = op.write_csv(tmp_path / "op.csv").read_text().splitlines()
    assert lines[0] == "ci,cj,C,E,W,N,S,NE,NW,SE,SW"
    assert len(lines) == 1 + 16
    row = dict(zip(lines[0].split(","), lines[1 + 4 + 1].split(",")))  # cell (1, 1)
    assert float(row["C"]) == -3.0 and float(row["NE"]) == 0.25 and float(row["E"]) == 0.5


# --- ACM ---------------------------------------------------------------------

def test_acm_interior_2h_row():
    lv = build_acm_hierarchy(GridSpec(16, 16), 2).levels[1]
    assert lv.cw[2, 2] == lv.ce[2, 2] == lv.cs[2, 2] == lv.cn[2, 2] == 2.0
    assert lv.cc[2, 2] == -8.0


@pytest.mark.parametrize("layout", sorted(BC_LAYOUTS))
@pytest.mark.parametrize("nx, ny, depth", [(8, 8, 2), (8, 8, 3), (16, 12, 3), (20, 12, 3), (13, 9, 2)])
def test_acm_equals_constant_galerkin_per_level(layout, nx, ny, depth):
    spec = make_spec(nx, ny, layout=layout)
    if (spec.periodic_x and nx % 2 ** (depth - 1)) or (spec.periodic_y and ny % 2 ** (depth - 1)):
        pytest.skip("padded periodic axis")
    levels = build_acm_hierarchy(spec, depth).levels
    for fine, coarse in zip(levels, levels[1:]):
        want = galerkin_constant(fine.to_sparse().toarray(), fine.shape)
        assert np.abs(coarse.to_sparse().toarray() - want).max() <= 1e-12 * np.abs(want).max()
        assert np.abs(coarse.row_sums()[1:-1, 1:-1]).max(initial=0.0) < 1e-12


def test_acm_too_deep_rejected():
    with pytest.raises(ConfigurationError, match="too small"):
        build_acm_hierarchy(GridSpec(8, 8), 4)
    with pytest.raises(ConfigurationError):
        build_acm_hierarchy(GridSpec(8, 8), 1)


def test_agglomerate_factor_two_shapes():
    st_ = agglomerate(FivePointStencil.from_grid(GridSpec(9, 6)), 2)
    assert st_.shape == (5, 3)


# --- GMG -----------------------------------------------------------------------

def test_gmg_interior_row():
    c = build_gmg_operator(GridSpec(64, 64, tile=8)).coeffs[3, 3]
    assert np.array_equal(c, [[0, 1, 0], [1, -4, 1], [0, 1, 0]])


def test_gmg_short_edge_tile():
    op = build_gmg_operator(GridSpec(500, 500, tile=16))
    # corner tile is 4x4 cells; face 4h over centre distance (16 + 4)/2 h
    assert op.ncx == 32 and op.tile_w[-1] == 4
    assert np.isclose(op.coeffs[-1, -1, 0, 1], 0.4)
    assert np.isclose(op.coeffs[-1, -1, 1, 0], 0.4)
    # full-height neighbour of a short column: face 16h over 10h
    assert np.isclose(op.coeffs[-1, 3, 0, 1], 1.6)


@given(st.sampled_from(sorted(BC_LAYOUTS)), st.integers(16, 60), st.integers(16, 60),
       st.sampled_from([4, 8]))
def test_gmg_row_sums_and_symmetry(layout, nx, ny, tile):
    spec = make_spec(nx, ny, tile=tile, layout=layout)
    op = build_gmg_operator(spec)
    A = op.to_sparse().toarray()
    assert np.allclose(A, A.T, rtol=0, atol=1e-13)
    if not any(k == "dirichlet" for k in spec.pressure_kinds.values()):
        assert np.abs(op.stencil.row_sums()).max() < 1e-12


# --- transfers ---------------------------------------------------------------------

def test_restrict_full_tile():
    assert np.array_equal(restrict_sum(np.ones((8, 8)), 4), np.full((2, 2), 16.0))


def test_restrict_short_edge_tile():
    c = restrict_sum(np.ones((500, 500)), GridSpec(500, 500, tile=16))
    assert c.shape == (32, 32)
    assert c[-1, 0] == 4 * 16 and c[0, -1] == 16 * 4 and c[-1, -1] == 16.0 and c[0, 0] == 256.0


@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 9), st.integers(0, 2**31 - 1))
def test_restrict_preserves_sum(nx, ny, tile, seed):
    f = np.random.default_rng(seed).standard_normal((nx, ny))
    assert np.isclose(restrict_sum(f, tile).sum(), f.sum(), rtol=1e-12, atol=1e-12)


def test_prolongate_constant_examples():
    assert np.array_equal(prolongate_constant(np.full((2, 3), 2.5), 4, (8, 12)), np.full((8, 12), 2.5))
    board = np.indices((3, 3)).sum(axis=0) % 2 * 1.0
    fine = prolongate_constant(board, 4, (12, 12))
    for I in range(3):
        for J in range(3):
            assert np.all(fine[4 * I:4 * I + 4, 4 * J:4 * J + 4] == board[I, J])
    assert fine.sum() == board.sum() * 16
    assert prolongate_constant(np.ones((32, 32)), 16, (500, 500)).shape == (500, 500)


@pytest.mark.parametrize("layout", sorted(BC_LAYOUTS))
def test_prolongate_bilinear_constant(layout):
    spec = make_spec(20, 12, tile=4, layout=layout)
    op = build_ismg_operator(spec)
    fine = prolongate_bilinear(np.full((op.ncx, op.ncy), -1.5), op)
    if spec.pressure_kinds["N"] == DIRICHLET:
        # last half tile falls linearly to zero on the fixed-pressure top: 3/4 and 1/4 of c
        assert np.allclose(fine[:, -2:], [-1.125, -0.375])
        fine = fine[:, :-2]
    assert np.allclose(fine, -1.5)


def test_prolongate_vanishes_towards_dirichlet_side():
    spec = make_spec(16, 16, tile=8, layout="open_top")
    op = build_ismg_operator(spec)
    _, ay = op.axes
    assert ay.wall_hi[12:].all() and not ay.wall_hi[:12].any() and not ay.wall_lo.any()
    fine = prolongate_bilinear(np.ones((2, 2)), op)
    # centre at 12, boundary at 16: cell centres 12.5..15.5
    assert np.allclose(fine[:, 12:], [7 / 8, 5 / 8, 3 / 8, 1 / 8])


def test_prolongate_bilinear_reproduces_ramp():
    spec = GridSpec(32, 24, 0.5, 8)
    op = build_ismg_operator(spec)
    ax, ay = op.axes
    xc = np.repeat(ax.centers[:, None], op.ncy, axis=1)
    fine = prolongate_bilinear(3.0 * xc - 1.0, op)
    x = (np.arange(32) + 0.5) * 0.5
    inside = (x >= ax.centers[0]) & (x <= ax.centers[-1])
    assert np.allclose(fine[inside], (3.0 * x[inside] - 1.0)[:, None], rtol=0, atol=1e-12)


def test_prolongate_bilinear_spot_check(rng):
    spec = GridSpec(24, 24, 1.0, 8)
    op = build_ismg_operator(spec)
    q = rng.standard_normal((3, 3))
    fine = prolongate_bilinear(q, op)
    ax, ay = op.axes
    # fine cell (13, 5): centre (13.5, 5.5), between coarse centres x 12|20 and y 4|12
    i, j = 13, 5
    val = bilinear_eval(q[1, 0], q[2, 0], q[1, 1], q[2, 1],
                        13.5 - ax.centers[1], 5.5 - ay.centers[0], 8.0, 8.0)
    assert np.isclose(fine[i, j], val, rtol=0, atol=1e-13)
