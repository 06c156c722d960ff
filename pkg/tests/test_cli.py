import csv
import subprocess
import sys

import numpy as np
import pytest

from stabctl.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_help_exits_zero(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "simulate" in out


def test_missing_subcommand(capsys):
    code, _, err = run(capsys)
    assert code == 1 and "subcommand" in err


def test_bad_flag_is_usage_error(capsys):
    code, _, _ = run(capsys, "simulate", "--bogus")
    assert code == 1


def test_negative_rho_from_command_line(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--rho", "-1", "--output-dir", str(tmp_path))
    assert code == 1 and "rho must be positive" in err


def test_config_error_names_line(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = bvp\nrho = 2.5\ncolour = red\n")
    code, _, err = run(capsys, "fixed-points", "--config", str(cfg))
    assert code == 1 and "line 3" in err and "colour" in err


def test_numerical_failure_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "limit-cycle", "--seed", "1.0", "-0.33",
                       "--output-dir", str(tmp_path))
    assert code == 2 and "numerical failure" in err


def test_fixed_points(capsys, tmp_path):
    code, out, _ = run(capsys, "fixed-points", "--output-dir", str(tmp_path))
    assert code == 0
    assert "0.958365857" in out and "a3_satisfied = True" in out
    rows = list(csv.DictReader(open(tmp_path / "equilibria.csv")))
    assert [r["kind"] for r in rows] == ["trivial", "nontrivial", "nontrivial"]
    xs = sorted(float(r["x"]) for r in rows if r["kind"] == "nontrivial")
    assert xs == pytest.approx([-1.40804, 1.40804], abs=1e-5)


def test_output_dir_precedence(capsys, tmp_path, monkeypatch):
    env_dir, cfg_dir, flag_dir = tmp_path / "env", tmp_path / "cfg", tmp_path / "flag"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"output_dir = {cfg_dir}\n")
    assert run(capsys, "fixed-points", "--config", str(cfg))[0] == 0
    assert (cfg_dir / "equilibria.csv").exists()
    monkeypatch.setenv("STABCTL_OUTPUT_DIR", str(env_dir))
    assert run(capsys, "fixed-points", "--config", str(cfg))[0] == 0
    assert (env_dir / "equilibria.csv").exists()
    assert run(capsys, "fixed-points", "--config", str(cfg), "--output-dir", str(flag_dir))[0] == 0
    assert (flag_dir / "equilibria.csv").exists()


def test_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--x0", "1.35", "--y0", "-0.26", "--q2", "-5",
                       "--output-dir", str(tmp_path))
    assert code == 0
    assert "outcome: TO_FIXED_POINT" in out
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 5
    np.testing.assert_allclose(data[0], [0, 1.35, -0.26, 0, -5])
    assert data[-1, 0] == pytest.approx(500.0)


def test_classify_small_grid(capsys, tmp_path):
    code, out, _ = run(capsys, "classify", "--panel", "g", "--resolution", "11",
                       "--output-dir", str(tmp_path))
    assert code == 0 and "regions:" in out
    pgm = list(tmp_path.glob("map_*.pgm"))
    assert len(pgm) == 1 and pgm[0].read_bytes().startswith(b"P5\n11 11\n255\n")
    assert len(list(csv.reader(open(pgm[0].with_suffix(".csv"))))) == 122


def test_check_assumptions(capsys):
    code, out, _ = run(capsys, "check-assumptions", "--rho", "2.5")
    assert code == 0
    for line in ("A1: FAIL", "A2: PASS", "A3: PASS", "A5: FAIL", "A4: NOT-CHECKED"):
        assert line in out


def test_limit_cycle(capsys, tmp_path):
    code, out, _ = run(capsys, "limit-cycle", "--output-dir", str(tmp_path))
    assert code == 0 and "stability: stable" in out
    period = float(next(l for l in out.splitlines() if l.startswith("period:")).split()[1])
    assert period == pytest.approx(12.8587447, rel=1e-6)
    assert (tmp_path / "cycle_stable.csv").exists()


def test_oned_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "oned", "audit", "--model", "double-well-1d", "--rho", "3.5")
    assert code == 0 and "A1': PASS" in out
    code, out, _ = run(capsys, "oned", "separatrix", "--model", "double-well-1d", "--rho", "3.5",
                       "--output-dir", str(tmp_path))
    assert code == 0 and "crossings: 0" in out
    assert len(list(tmp_path.glob("separatrix_*.csv"))) == 3
    code, out, _ = run(capsys, "oned", "sweep", "--model", "double-well-1d", "--rho", "3.5",
                       "--x-range", "-6", "6", "--q-range", "-12", "12",
                       "--resolution", "101", "101", "--output-dir", str(tmp_path))
    assert code == 0 and "total regions: 4" in out and "saddles: 3" in out


def test_oned_on_planar_model_is_usage_error(capsys):
    code, _, _ = run(capsys, "oned", "audit", "--model", "bvp")
    assert code == 1


def test_fixed_points_on_1d_model(capsys):
    code, out, _ = run(capsys, "fixed-points", "--model", "double-well-1d", "--rho", "3.5")
    assert code == 0
    assert out.count("saddle") >= 3 and "x = 1.22474487" in out


def test_planar_command_on_1d_model_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "limit-cycle", "--model", "double-well-1d",
                       "--output-dir", str(tmp_path))
    assert code == 1 and "oned" in err


def test_console_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "stabctl", "fixed-points",
                          "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "trivial" in res.stdout
