import json
import subprocess
import sys

import pytest

from chemofluid import harness
from chemofluid.cli import build_parser, main
from chemofluid.config import OUTPUT_ROOT_ENV, ScenarioConfig
from chemofluid.errors import SolverError

SMALL = ScenarioConfig(nx=8, ny=8, preset="uniform", mass=0.1, eps=0.1, t_end=0.5, sample_interval=0.1,
                       output_dir="cli_run")


@pytest.fixture
def cfg(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    return SMALL.save(tmp_path / "s.ini")


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_run_ok_and_output_root(cfg, tmp_path, capsys):
    assert main(["run", str(cfg), "--trace-lyapunov"]) == 0
    out_dir = tmp_path / "root" / "cli_run"
    assert (out_dir / "timeseries.csv").exists() and (out_dir / "final.ckpt").exists()
    assert "lyapunov" in capsys.readouterr().out


def test_config_error_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nwarp = 9\n")
    assert main(["run", str(bad)]) == 3
    assert main(["run", str(tmp_path / "missing.ini")]) == 3
    assert "configuration error" in capsys.readouterr().err


def test_solver_error_exit_2(cfg, tmp_path, monkeypatch):
    real, calls = harness.step, []

    def flaky(state, params, dt_cap=None):
        calls.append(1)
        if len(calls) > 5:
            raise SolverError("injected")
        return real(state, params, dt_cap=dt_cap)

    monkeypatch.setattr(harness, "step", flaky)
    assert main(["run", str(cfg)]) == 2
    assert (tmp_path / "root" / "cli_run" / "final.ckpt").exists()


def test_check_json_and_exit_codes(cfg, tmp_path, capsys):
    assert main(["run", str(cfg)]) == 0
    ckpt = tmp_path / "root" / "cli_run" / "final.ckpt"
    report = tmp_path / "r.json"
    assert main(["check", str(ckpt), "--json", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["passed"] and data["kind"] == "checkpoint"
    capsys.readouterr()
    assert main(["check", str(ckpt)]) == 0
    io = capsys.readouterr()
    assert json.loads(io.out)["passed"] and "overall" in io.err
    assert main(["check", str(tmp_path / "nothing.ckpt")]) == 2


def test_sweep_and_plot_data(cfg, tmp_path):
    assert main(["sweep", str(cfg), "--masses", "0.1", "0.2", "--workers", "1"]) == 0
    root = tmp_path / "root" / "cli_run"
    assert (root / "sweep_summary.json").exists()
    assert main(["sweep", str(cfg)]) == 0
    run_dir = root / "mass_0.1"
    assert main(["plot-data", str(run_dir), "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "F_value.dat").exists()


def test_console_module_entry(cfg):
    proc = subprocess.run([sys.executable, "-m", "chemofluid.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "plot-data" in proc.stdout
