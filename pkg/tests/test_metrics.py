import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ismg.metrics import COLUMNS, RunMetrics, read_csv


def test_fine_sweep_over_whole_grid():
    m = RunMetrics()
    m.record_sweep("fine", 5, 4096, 4096)
    assert m.N_Lap == 1.0 and m.NCC_f == 2 and m.I_f == 1


def test_coarse_nine_point_sweep_tile_16():
    m = RunMetrics()
    m.record_sweep("coarse", 9, 1, 256)
    # (1/256) * (9/5)
    assert m.N_Lap == 0.00703125
    assert m.NCC_c == 1 and m.I_c == 1


def test_ten_fine_eight_coarse():
    m = RunMetrics()
    for _ in range(10):
        m.record_sweep("fine", 5, 100, 100)
    for _ in range(8):
        m.record_sweep("coarse", 9, 4, 100)
    assert m.NCC_t == 28
    row = m.close_timestep()
    assert row["NCC_t"] == 28 and row["NCC_f"] == 20 and row["NCC_c"] == 8


def test_explicit_sync_cost_and_bad_kind():
    m = RunMetrics()
    m.record_sweep("coarse", 5, 4, 64, sync_cost=2)
    assert m.NCC_c == 2
    with pytest.raises(ValueError):
        m.record_sweep("middle", 5, 4, 64)


def test_zero_activity_row_and_reset():
    m = RunMetrics()
    row = m.close_timestep()
    assert row["step"] == 1
    assert all(row[k] == 0 for k in COLUMNS if k != "step")
    m.record_sweep("fine", 5, 1, 1)
    m.record_restriction()
    m.record_prolongation(2)
    row = m.close_timestep(1e-7)
    assert (row["step"], row["restrictions"], row["prolongations"], row["residual_final"]) == \
        (2, 1, 2, 1e-7)
    assert m.I_f == 0 and m.NCC_t == 0


def test_csv_header_and_rows(tmp_path):
    m = RunMetrics()
    for k in range(1000):
        for _ in range(k % 3):
            m.record_sweep("fine", 5, 10, 10)
        m.close_timestep()
    path = m.write_csv(tmp_path / "m.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 1001
    assert read_csv(path) == m.rows


def test_csv_error_names_path(tmp_path):
    m = RunMetrics()
    with pytest.raises(OSError, match="nope"):
        m.write_csv(tmp_path / "nope" / "m.csv")


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=60),
       st.integers(1, 60))
def test_means_match_offline_recomputation(plan, window):
    m = RunMetrics()
    for nf, nc in plan:
        for _ in range(nf):
            m.record_sweep("fine", 5, 256, 256)
        for _ in range(nc):
            m.record_sweep("coarse", 9, 1, 256)
        m.close_timestep()
    tail = plan[-window:]
    got = m.means(window)
    assert np.isclose(got["NCC_t"], np.mean([2 * f + c for f, c in tail]))
    assert np.isclose(got["N_Lap"], np.mean([f + c * 9 / 5 / 256 for f, c in tail]))
    assert np.isclose(got["I_f"], np.mean([f for f, _ in tail]))


def test_means_empty_and_summary():
    m = RunMetrics()
    assert m.means()["NCC_t"] == 0.0
    m.record_sweep("fine", 5, 1, 1)
    m.close_timestep()
    text = m.summary()
    assert "steps = 1" in text and "mean_NCC_t = 2" in text
    assert all(" = " in line for line in text.splitlines())
