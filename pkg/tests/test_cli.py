import pytest

from reactive_rx import cli, harness

SPEC = """
params.a_um = 0.5
params.r0_um = 1
params.D_A = 5e-9
params.k_f = 3.14e-14
params.N_A = 100
sim.dt_s = 1e-7
sim.horizon_s = 5e-6
sim.trials = 2
run.modes = analytic, simulate, compare
"""


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SPEC, encoding="utf-8")
    return path


def test_run_success(spec_file, tmp_path, capsys):
    assert cli.main(["run", str(spec_file), "--out", str(tmp_path / "o"), "--seed", "4"]) == 0
    manifest = (tmp_path / "o" / "manifest.txt").read_text(encoding="utf-8")
    assert "seed=4" in manifest
    assert "manifest:" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("params.a_um = -1\n", encoding="utf-8")
    assert cli.main(["run", str(path)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_code(spec_file, tmp_path):
    spec_file.write_text(SPEC + "sweep.k_f = 1e-11\n", encoding="utf-8")
    assert cli.main(["run", str(spec_file), "--out", str(tmp_path / "o")]) == 3


def test_strict_comparison_failure_exit_code(spec_file, tmp_path, monkeypatch):
    monkeypatch.setattr(harness, "simulation_agrees", lambda report: False)
    out = str(tmp_path / "o")
    assert cli.main(["run", str(spec_file), "--out", out]) == 0
    assert cli.main(["run", str(spec_file), "--out", out, "--strict"]) == 4


def test_check_command(capsys):
    assert cli.main(["check"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_figure_preset_analytic_only(tmp_path):
    out = tmp_path / "fig3"
    assert cli.main(["figure3", "--modes", "analytic", "--out", str(out)]) == 0
    assert len(list(out.glob("*_analytic.csv"))) == 5


def test_bad_jobs_rejected(spec_file):
    assert cli.main(["run", str(spec_file), "--jobs", "0"]) == 2
