import pytest

from ismg.cli import build_run_config, embedded_configs, load_config, main, make_case, parse_config_text
from ismg.field import ConfigurationError
from ismg.metrics import read_csv


def write_cfg(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


MINI = """\
case.name = shear_cavity
grid.nx = 24
case.steps = 6
solver.scheme = ISMG
solver.tile = 4
sweep.schemes = ISMG, ACM, PlainGS
sweep.tiles = 4
sweep.tol_coarse = 1e-5
"""


def test_run_quiescent_all_zero(tmp_path, capsys):
    code = main(["run", "quiescent", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "metrics.csv")
    assert len(rows) == 10
    assert all(r[k] == 0 for r in rows for k in r if k != "step")
    for name in ("iterations.png", "velocity.png", "final.vtk", "summary.txt"):
        assert (tmp_path / name).stat().st_size > 0
    out = capsys.readouterr().out
    assert "mean_NCC_t = 0" in out and "stop_reason = steps" in out


def test_unknown_key_exits_2_and_names_it(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "grid.nx = 16\ngrid.nz = 4\n")
    assert main(["run", cfg, "--out", str(tmp_path)]) == 2
    assert "grid.nz" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["grid.nx 16\n", "grid.nx = sixteen\n",
                                  "case.name = warp_drive\n", "solver.scheme = SOR\n"])
def test_malformed_configs_exit_2(tmp_path, text):
    assert main(["run", write_cfg(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2


def test_parse_comments_and_types():
    v = parse_config_text("# c\ngrid.nx = 32  # trailing\nsweep.tiles = 8, 16\n"
                          "case.accept_nonconverged = yes\n")
    assert v == {"grid.nx": 32, "sweep.tiles": (8, 16), "case.accept_nonconverged": True}


def test_embedded_configs_load():
    names = embedded_configs()
    for name in ("shear_cavity", "lid_cavity", "jet", "quiescent", "taylor_green"):
        assert name in names
    for name in names:
        make_case(build_run_config(load_config(name)))


def test_run_is_deterministic_with_seed(tmp_path):
    cfg = write_cfg(tmp_path, MINI + "output.seed = 11\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert (a / "final.vtk").read_bytes() == (b / "final.vtk").read_bytes()


def test_run_nonconvergence_exits_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, MINI + "solver.max_total_sweeps = 2\nsolver.scheme = PLAIN\n")
    assert main(["run", cfg, "--out", str(tmp_path)]) == 1
    assert "aborted" in capsys.readouterr().err
    assert len(read_csv(tmp_path / "metrics.csv")) == 1


def test_sweep_writes_csv_and_figures(tmp_path, capsys):
    cfg = write_cfg(tmp_path, MINI)
    assert main(["sweep", cfg, "--out", str(tmp_path), "--jobs", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "scheme,tile_or_depth,tol_coarse,NCC_f,NCC_c,NCC_t,N_Lap,converged"
    assert len(out) == 1 + 3
    assert (tmp_path / "sweep_ncc.png").exists() and (tmp_path / "sweep_nlap.png").exists()


def test_dump_operator(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "grid.nx = 32\nsolver.scheme = ISMG\nsolver.tile = 8\n")
    assert main(["dump-operator", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "coarse_operator.csv").read_text().splitlines()
    assert lines[0] == "ci,cj,C,E,W,N,S,NE,NW,SE,SW" and len(lines) == 17
    cfg = write_cfg(tmp_path, "grid.nx = 32\nsolver.scheme = ACM\n", "acm.cfg")
    assert main(["dump-operator", cfg, "--out", str(tmp_path)]) == 2


def test_validate_cavity_prints_comparison(tmp_path, capsys):
    code = main(["validate-cavity", "--n", "32", "--t-end", "2", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code in (0, 1)
    for name, ref in (("u_ext", "0.3781"), ("v_min", "-0.5142"), ("v_max", "0.3659")):
        assert f"{name} = " in out and f"reference = {ref}" in out
    assert ("result = PASS" in out) == (code == 0)
    assert (tmp_path / "velocity.png").exists()


def test_precision_32(tmp_path):
    cfg = write_cfg(tmp_path, MINI)
    assert main(["run", cfg, "--out", str(tmp_path), "--precision", "32"]) == 0


def test_build_run_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        make_case(build_run_config({"grid.nx": -4}))
