import csv
import json

import pytest

from kinetic_selfsim import cli
from kinetic_selfsim.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def write_config(tmp_path, body):
    path = tmp_path / "run.cfg"
    path.write_text(body + "\n")
    return path


def test_help(capsys):
    assert main(["--help"]) == EXIT_PASS
    assert "refute-landau" in capsys.readouterr().out


class TestCheckTheta:
    def test_rejected_theta_exits_with_failure(self, tmp_path, capsys):
        code = main(["check-theta", "--theta", "0.6", "--gamma=-3", "--mode", "landau-inhom", "--out", str(tmp_path)])
        assert code == EXIT_FAIL
        assert "violated: θ < 1/2" in capsys.readouterr().out
        assert read_json(tmp_path / "check_theta.json")["admissible"] is False

    def test_admissible_theta(self, tmp_path):
        assert main(["check-theta", "--theta", "0.2", "--gamma=-2.5", "--out", str(tmp_path)]) == EXIT_PASS


class TestInvalidConfiguration:
    def test_invalid_config_file(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("N=7\n")
        assert main(["check-theta", "--config", str(path), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert main(["check-theta", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_log_format(self, tmp_path):
        assert main(["check-theta", "--log-format", "xml", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_option(self):
        assert main(["check-theta", "--colour", "red"]) == EXIT_USAGE

    def test_inadmissible_theta_blocks_refutation(self, tmp_path):
        args = ["refute-landau", "--theta", "0.7", "--gamma=-2.5", "--n", "8", "--out", str(tmp_path)]
        assert main(args) == EXIT_USAGE

    def test_unstable_step_is_a_configuration_error(self, tmp_path):
        args = ["evolve", "--n", "16", "--extent", "4", "--steps", "1", "--dt", "10", "--out", str(tmp_path)]
        assert main(args) == EXIT_USAGE


def test_refute_landau_gaussian(tmp_path):
    args = [
        "refute-landau", "--profile", "gaussian", "--theta", "0.2", "--gamma=-2.5",
        "--n", "32", "--extent", "8", "--threads", "1", "--out", str(tmp_path),
    ]
    assert main(args) == EXIT_PASS
    verdict = read_json(tmp_path / "refute_landau.json")
    assert verdict["verdict"] == "refuted"
    assert verdict["test"] == "plateau/1"


def test_blowup_fit_of_manufactured_history(tmp_path):
    assert main(["blowup-fit", "--theta", "0.3", "--gamma=-2.5", "--out", str(tmp_path)]) == EXIT_PASS
    report = read_json(tmp_path / "blowup.json")
    assert report["trend"] == "type_i"
    assert report["theta"] == pytest.approx(0.3, abs=0.02)


def test_evolve_writes_monitor(tmp_path):
    args = [
        "evolve", "--n", "16", "--extent", "4", "--gamma=-2.5", "--steps", "3", "--dt", "1e-4",
        "--threads", "1", "--out", str(tmp_path),
    ]
    assert main(args) == EXIT_PASS
    with (tmp_path / "monitor.csv").open(newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4
    assert (tmp_path / "entropy.svg").exists()
    assert read_json(tmp_path / "evolve.json")["entropy_monotone"] is True


def test_blowup_fit_rejects_incomplete_monitor_file(tmp_path, mocker):
    spy = mocker.spy(cli.evolve, "blowup_indicator")
    path = tmp_path / "monitor.csv"
    path.write_text("step,time,mass\n0,0.0,1.0\n")
    assert main(["blowup-fit", "--out", str(tmp_path), "--config", str(write_config(tmp_path, f"INPUT={path}"))]) == EXIT_USAGE
    assert spy.call_count == 0
