import json

import numpy as np
import pytest

from savanna_pdmp.cli import dispatch
from savanna_pdmp.ensemble import read_grid, read_report
from savanna_pdmp.kvfile import read_kv
from savanna_pdmp.pdmp import read_trajectory_csv


def run(argv, capsys):
    code = dispatch([str(a) for a in argv])
    return code, capsys.readouterr().err


def error_record(err):
    return json.loads(err.strip().splitlines()[-1])


def test_simulate_writes_fires(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _ = run(["simulate", "--w0", 0.01, "--g0", 0.2, "--horizon", 100, "--out", out], capsys)
    assert code == 0
    t, w, g, events = read_trajectory_csv(out)
    assert "fire_post" in events
    assert t[-1] == 100.0


def test_simulate_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["simulate", "--seed", 5, "--out", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_periodic_simulation(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, _ = run(["simulate", "--fire-mode", "periodic", "--tau-fixed", 10, "--horizon", 50, "--out", out], capsys)
    assert code == 0
    _, _, _, events = read_trajectory_csv(out)
    assert events.count("fire_post") == 5


def test_phase_figure1(tmp_path, capsys):
    code, _ = run(["phase", "--figure1", "--n-starts", 2, "--n-points", 20, "--out", tmp_path], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["phase_left_rw0.08_rg1.5.csv", "phase_right_rw0.25_rg0.5.csv"]
    text = (tmp_path / names[1]).read_text().splitlines()
    assert text[0] == "kind,curve,t,w,g"
    assert any(line.startswith("equilibrium:saddle") for line in text)


def test_ensemble_report(tmp_path, capsys):
    argv = ["ensemble", "--n", 500, "--times", 5, 1, "--grid", 8, 8, "--out"]
    assert run(argv + [tmp_path / "a"], capsys)[0] == 0
    assert run(argv + [tmp_path / "b"], capsys)[0] == 0
    rep = read_report(tmp_path / "a")
    assert rep.times == [1.0, 5.0]
    for name in ("manifest.txt", "grid_0000.txt", "grid_0001.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fpe_evolve_and_stationary(tmp_path, capsys):
    code, _ = run(["fpe", "--grid", 12, 12, "--T", 2, "--out", tmp_path / "e"], capsys)
    assert code == 0
    assert read_grid(tmp_path / "e" / "grid.txt").mass() == pytest.approx(1.0)
    code, _ = run(
        ["fpe", "--grid", 12, 12, "--residual-tol", 1e-6, "--initial", tmp_path / "e" / "grid.txt", "--out", tmp_path / "s"],
        capsys,
    )
    assert code == 0
    report = read_kv(tmp_path / "s" / "report.txt")
    assert report["converged"] == "true"


def test_fpe_not_converged_exit_code(tmp_path, capsys):
    code, err = run(["fpe", "--grid", 8, 8, "--residual-tol", 1e-30, "--t-max", 5, "--out", tmp_path], capsys)
    assert code == 6
    assert error_record(err)["error"] == "NotConverged"
    assert read_kv(tmp_path / "report.txt")["converged"] == "false"


def test_stationary_compare_record(tmp_path, capsys):
    argv = ["stationary-compare", "--n", 2000, "--burn-in", 20, "--grid", 16, 16, "--residual-tol", 1e-6, "--out", tmp_path]
    assert run(argv, capsys)[0] == 0
    rec = read_kv(tmp_path / "compare.txt")
    mc, fpe = read_grid(tmp_path / "mc.txt"), read_grid(tmp_path / "fpe.txt")
    assert float(rec["l1_distance"]) == pytest.approx(np.abs(mc.values - fpe.values).sum() / 256, rel=1e-12)


def test_verify_report(tmp_path, capsys):
    out = tmp_path / "cert.txt"
    code, _ = run(["verify", "--points", 200, "--reach", 2, "--resolution", 50, "--out", out], capsys)
    assert code == 0
    rec = read_kv(out)
    assert float(rec["delta"]) > 0
    assert rec["norm"] == "euclidean"


def test_params_file_and_flag_precedence(tmp_path, capsys):
    pfile = tmp_path / "p.txt"
    pfile.write_text("# custom\nr_w = 0.3\nM_w = 0.2\n")
    out = tmp_path / "v.txt"
    code, _ = run(
        ["verify", "--params", pfile, "--r-w", 0.35, "--points", 10, "--reach", 1, "--resolution", 20, "--out", out],
        capsys,
    )
    assert code == 0
    # -(r_w + r_g): the flag wins over the file for r_w
    assert float(read_kv(out)["lv_origin_limit"]) == pytest.approx(-0.85)


def test_unknown_subcommand(capsys):
    code, err = run(["plot"], capsys)
    assert code == 2
    rec = error_record(err)
    assert rec["error"] == "UnknownSubcommand" and rec["exit_code"] == 2


def test_bad_option_is_usage_error(tmp_path, capsys):
    code, err = run(["simulate", "--horizon", "abc", "--out", tmp_path / "x.csv"], capsys)
    assert code == 2


def test_missing_params_file(tmp_path, capsys):
    code, err = run(["simulate", "--params", tmp_path / "nope.txt", "--out", tmp_path / "x.csv"], capsys)
    assert code == 3
    assert error_record(err)["error"] == "ConfigError"


def test_invalid_parameters(tmp_path, capsys):
    code, err = run(["simulate", "--M-w", 1.5, "--out", tmp_path / "x.csv"], capsys)
    assert code == 4


def test_invalid_initial_state(tmp_path, capsys):
    code, err = run(["simulate", "--w0", 2.0, "--out", tmp_path / "x.csv"], capsys)
    assert code == 4
    assert "exit_code" in error_record(err)
