import json

import pytest

from flockmf import cli, validation
from flockmf.io import read_trajectory, sha256

SMALL = """
n = 8
m_multiplier = 2
t_final = 0.04
dt = 0.01
reps = 2
"""


def write_config(tmp_path, text=SMALL):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_simulate(tmp_path):
    out = tmp_path / "sim"
    code = cli.main(["simulate", "--config", write_config(tmp_path), "--out", str(out)])
    assert code == cli.EXIT_OK
    traj = read_trajectory(out / "trajectory.csv")
    assert traj.positions.shape == (5, 8, 3)
    rep = json.loads((out / "report.json").read_text())
    assert rep["kind"] == "simulate" and len(rep["diagnostics"]) == 2
    assert rep["schedule_identity_residual"] <= 1e-12
    man = manifest(out)
    assert man["files"]["trajectory.csv"] == sha256(out / "trajectory.csv")
    assert man["files"]["report.json"] == sha256(out / "report.json")
    assert man["config"]["n"] == 8 and man["schedule"]["n"] == 8


def test_simulate_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path)
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"])
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "c")])
    a, b, c = (sha256(tmp_path / k / "trajectory.csv") for k in "abc")
    assert a == c and a != b


def test_couple(tmp_path, capsys):
    out = tmp_path / "couple"
    assert cli.main(["couple", "--config", write_config(tmp_path), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["kind"] == "couple" and rep["err"][0] == 0.0
    assert len(rep["alignment"]) == 2 and rep["m"] == 16
    assert "sup-error" in capsys.readouterr().out


def test_sweep(tmp_path):
    text = "n_list = [64, 65, 66]\nreps = 5\nm_multiplier = 1\nt_final = 0.02\ndt = 0.01\n"
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", write_config(tmp_path, text), "--out", str(out)]) == 0
    doc = json.loads((out / "sweep.json").read_text())
    assert len(doc["cells"]) == 3 and "slope" in doc and "amplification" in doc


def test_sweep_rejects_explicit_xi(tmp_path):
    text = SMALL + "eps = 0.5\ndelta = 0.5\nnu = 1.0\n"
    assert cli.main(["sweep", "--config", write_config(tmp_path, text),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_validate_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setattr(validation, "QUICK_CHECKS",
                        (validation.check_kernel_bounds, validation.check_schedule_identity))
    out = tmp_path / "val"
    assert cli.main(["validate", "--out", str(out)]) == cli.EXIT_OK
    doc = json.loads((out / "validation.json").read_text())
    assert [r["passed"] for r in doc] == [True, True]

    def failing():
        return validation.CheckResult("always fails", False, "forced")
    monkeypatch.setattr(validation, "QUICK_CHECKS", (failing,))
    assert cli.main(["validate", "--out", str(out)]) == cli.EXIT_VALIDATION


def test_config_error_exit(tmp_path, capsys):
    code = cli.main(["simulate", "--config", write_config(tmp_path, "alpha = 1.5\n"),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    assert "alpha" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_bad_seed_and_threads(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["simulate", "--config", cfg, "--seed", "-1"]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", cfg, "--threads", "0"]) == cli.EXIT_CONFIG


def test_blowup_exit(tmp_path, capsys):
    text = SMALL + "gamma = 1e300\n"
    code = cli.main(["simulate", "--config", write_config(tmp_path, text),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_BLOWUP
    assert "step" in capsys.readouterr().err


def test_out_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write_config(tmp_path, SMALL + f"out_dir = '{tmp_path / 'from_config'}'\n")
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "from_env"))
    cli.main(["simulate", "--config", cfg])
    assert (tmp_path / "from_env" / "manifest.json").exists()
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "from_flag")])
    assert (tmp_path / "from_flag" / "manifest.json").exists()
    monkeypatch.delenv(cli.OUT_ENV)
    cli.main(["simulate", "--config", cfg])
    assert (tmp_path / "from_config" / "manifest.json").exists()


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["fly"])
