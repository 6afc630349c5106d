import json

import pytest
from click.testing import CliRunner

from bosefield import checks
from bosefield.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, cli


def _diagnostic(result) -> dict:
    return json.loads(result.output.strip().splitlines()[-1])


@pytest.fixture
def runner():
    return CliRunner()


def test_ideal_ref(runner, tmp_path):
    args = ["ideal-ref", "--atoms", "5", "--temp", "2", "--cutoff", "3", "--out", str(tmp_path)]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_OK
    assert (tmp_path / "ideal_reference.tsv").exists()

    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_IO
    diagnostic = _diagnostic(result)
    assert diagnostic["error"] == "BFFileExists"
    assert diagnostic["exit_code"] == EXIT_IO

    result = runner.invoke(cli, [*args, "--overwrite", "--format", "arrow"])
    assert result.exit_code == EXIT_OK
    assert (tmp_path / "ideal_reference.arrow").exists()


def test_ideal_ref_invalid_temperature(runner, tmp_path):
    args = ["ideal-ref", "--atoms", "5", "--temp", "0", "--cutoff", "3", "--out", str(tmp_path)]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_CONFIG
    assert _diagnostic(result)["error"] == "BFInvalidParameter"


def test_gpe(runner):
    result = runner.invoke(cli, ["gpe", "--atoms", "10", "--coupling", "0", "--temp", "2.5"])
    assert result.exit_code == EXIT_OK
    report = _diagnostic(result)
    assert report["mu"] == pytest.approx(0.5, abs=1e-5)
    assert report["cutoff"] == 3
    assert "mu_thomas_fermi" not in report

    result = runner.invoke(cli, ["gpe", "--atoms", "10", "--coupling", "-1"])
    assert result.exit_code == EXIT_CONFIG
    assert _diagnostic(result)["error"] == "ValidationError"


def test_run_rejects_unknown_keys(runner, tmp_path):
    config_file = tmp_path / "run.toml"
    config_file.write_text("[model]\natoms = 10\ntemperature = 1.0\nflavour = 1\n")
    result = runner.invoke(cli, ["run", "--config", str(config_file)])
    assert result.exit_code == EXIT_CONFIG
    assert _diagnostic(result)["error"] == "BFInvalidParameter"


def test_sweep_rejects_bad_temperatures(runner, tmp_path):
    config_file = tmp_path / "sweep.toml"
    config_file.write_text("[model]\natoms = 10\ntemperature = 1.0\n")
    args = ["sweep", "--config", str(config_file), "--temps", "1,warm", "--seed", "3"]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_CONFIG
    assert "--temps" in _diagnostic(result)["message"]


def test_check_exit_status(runner, monkeypatch):
    monkeypatch.setattr(checks, "CHECKS", {"always_passes": lambda fast: (True, "ok")})
    result = runner.invoke(cli, ["check", "--fast"])
    assert result.exit_code == EXIT_OK
    assert "always_passes" in result.output

    monkeypatch.setattr(checks, "CHECKS", {"always_fails": lambda fast: (False, "broken")})
    result = runner.invoke(cli, ["check"])
    assert result.exit_code == EXIT_NUMERICAL
    diagnostic = _diagnostic(result)
    assert diagnostic["error"] == "BFNumericalError"
    assert "always_fails" in diagnostic["message"]
