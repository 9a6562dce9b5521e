"""Command line: subcommands, exit codes and the files they write."""

import json

import numpy as np
import pytest

from perfclip import cli
from perfclip.errors import DivergenceError
from perfclip.harness.output import read_table

SMALL = ["--set", "experiment.T=200", "--set", "experiment.thinning=20", "--trials", "4"]


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


class TestPresetsCommand:
    def test_lists_presets(self, capsys):
        assert cli.dispatch(["presets"]) == 0
        listed = _stdout_json(capsys)
        assert {"quadratic", "bias-amplification", "privacy-tradeoff", "logistic", "nonconvex"} <= set(listed)


class TestOracleCommand:
    def test_quadratic_reference_points(self, capsys, tmp_path):
        assert cli.dispatch(["oracle", "--preset", "quadratic", "--out", str(tmp_path), "-q"]) == 0
        result = _stdout_json(capsys)
        assert result["oracle"]["theta_ps"][0] == pytest.approx(-1.11111, abs=1e-5)
        assert result["closed_form_bias"] == pytest.approx(0.97547, abs=1e-5)
        assert result["closed_form_bias"] <= result["bias_upper"]
        assert (tmp_path / "oracle.json").exists()
        assert (tmp_path / "config.json").exists()

    def test_failed_oracle_exits_with_config_status(self, capsys, tmp_path):
        code = cli.dispatch(["oracle", "--preset", "quadratic", "--set", "distribution.beta=0.2", "--out", str(tmp_path)])
        assert code == 2
        assert "category=config" in capsys.readouterr().err


class TestCalibrateCommand:
    def test_reference_sigma(self, capsys, tmp_path):
        argv = [
            "calibrate", "--preset", "quadratic", "--out", str(tmp_path), "-q",
            "--set", "privacy.epsilon=0.1",
            "--set", "privacy.delta=1e-5",
            "--set", "privacy.m=100000",
            "--set", "experiment.T=100000",
        ]
        assert cli.dispatch(argv) == 0
        result = _stdout_json(capsys)
        assert result["sigma_dp"] == pytest.approx(0.10730, abs=1e-5)
        assert result["within_limit"] is False
        assert 0.0 < result["c_star"] <= result["G"]

    def test_strict_mode_fails_calibration(self, capsys, tmp_path):
        argv = [
            "calibrate", "--preset", "quadratic", "--out", str(tmp_path),
            "--set", "privacy.epsilon=0.1",
            "--set", "privacy.m=100000",
            "--set", "privacy.strict=true",
        ]
        assert cli.dispatch(argv) == 2
        assert "category=calibration" in capsys.readouterr().err

    def test_needs_epsilon(self, capsys, tmp_path):
        assert cli.dispatch(["calibrate", "--preset", "quadratic", "--out", str(tmp_path)]) == 2
        assert "privacy.epsilon" in capsys.readouterr().err


class TestRunCommand:
    def test_writes_tables_and_metadata(self, capsys, tmp_path):
        assert cli.dispatch(["run", "--preset", "quadratic", "--out", str(tmp_path), "-q"] + SMALL) == 0
        result = _stdout_json(capsys)
        assert set(result["algorithms"]) == {"pcsgd", "dicesgd"}
        for name in ("pcsgd.csv", "dicesgd.csv", "metadata.json", "config.json"):
            assert (tmp_path / name).exists()
        assert read_table(tmp_path / "pcsgd.csv")["t"].size == 11

    def test_bounds_column(self, capsys, tmp_path):
        argv = ["run", "--preset", "quadratic", "--out", str(tmp_path), "--bounds", "-q",
                "--set", "experiment.algorithms=['pcsgd']"] + SMALL
        assert cli.dispatch(argv) == 0
        assert "bound" in read_table(tmp_path / "pcsgd.csv")

    @pytest.mark.parametrize("workers", ["2", "8"])
    def test_workers_do_not_change_results(self, capsys, tmp_path, workers):
        argv = ["run", "--preset", "quadratic", "-q", "--trials", "40",
                "--set", "experiment.T=200", "--set", "experiment.thinning=20"]
        assert cli.dispatch(argv + ["--out", str(tmp_path / "one"), "--workers", "1"]) == 0
        assert cli.dispatch(argv + ["--out", str(tmp_path / "many"), "--workers", workers]) == 0
        for name in ("pcsgd.csv", "dicesgd.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "many" / name).read_bytes()

    def test_seed_changes_results(self, capsys, tmp_path):
        base = ["run", "--preset", "quadratic", "-q"] + SMALL
        assert cli.dispatch(base + ["--out", str(tmp_path / "a"), "--seed", "1"]) == 0
        assert cli.dispatch(base + ["--out", str(tmp_path / "b"), "--seed", "2"]) == 0
        assert (tmp_path / "a" / "pcsgd.csv").read_bytes() != (tmp_path / "b" / "pcsgd.csv").read_bytes()

    def test_rerun_from_metadata(self, capsys, tmp_path):
        assert cli.dispatch(["run", "--preset", "quadratic", "-q", "--out", str(tmp_path / "a")] + SMALL) == 0
        metadata = tmp_path / "a" / "metadata.json"
        assert cli.dispatch(["run", "--config", str(metadata), "-q", "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "pcsgd.csv").read_bytes() == (tmp_path / "b" / "pcsgd.csv").read_bytes()

    def test_output_path_is_a_file(self, capsys, tmp_path):
        blocker = tmp_path / "taken"
        blocker.write_text("", encoding="utf-8")
        assert cli.dispatch(["run", "--preset", "quadratic", "--out", str(blocker)] + SMALL) == 4
        assert "category=io" in capsys.readouterr().err


class TestSweepCommand:
    def test_bias_sweep_flags_unstable_rows(self, capsys, tmp_path):
        argv = ["sweep", "bias", "--preset", "bias-amplification", "--out", str(tmp_path), "-q",
                "--grid", "0.0", "0.2"] + SMALL
        assert cli.dispatch(argv) == 0
        rows = _stdout_json(capsys)["rows"]
        assert [row["unstable"] for row in rows] == [False, True]
        assert 0.0 < rows[0]["closed_form_bias"] <= rows[0]["bias_upper"]
        assert rows[1]["plateau"] is None
        assert (tmp_path / "bias_sweep.csv").exists()


class TestCheckBoundsCommand:
    def test_reports_each_bound(self, capsys, tmp_path):
        argv = ["check-bounds", "--preset", "quadratic", "--out", str(tmp_path), "-q", "--set", "experiment.T=1000"]
        assert cli.dispatch(argv) == 0
        result = _stdout_json(capsys)
        assert result["pcsgd_strongly_convex"]["rhs"] >= result["pcsgd_strongly_convex"]["bias_upper"]
        assert result["dicesgd_strongly_convex"]["category"] == "precondition"
        assert "bounds.B" in result["dicesgd_strongly_convex"]["error"]

    def test_writes_bound_curves(self, capsys, tmp_path):
        argv = ["check-bounds", "--preset", "quadratic", "--out", str(tmp_path), "-q",
                "--set", "experiment.T=1000", "--set", "experiment.thinning=100"]
        assert cli.dispatch(argv) == 0
        result = _stdout_json(capsys)
        assert str(tmp_path / "bounds.csv") in result["files"]

        table = read_table(tmp_path / "bounds.csv")
        np.testing.assert_array_equal(table["t"], np.arange(0, 1001, 100))
        curve = table["pcsgd_scvx"]
        assert curve[0] == pytest.approx((5.0 + 10.0 / 9.0) ** 2, rel=1e-4)
        assert np.all(np.diff(curve[1:]) <= 0)
        assert curve[-1] == pytest.approx(result["pcsgd_strongly_convex"]["rhs"], rel=1e-12)
        assert curve[-1] >= result["pcsgd_strongly_convex"]["bias_upper"]
        assert "dicesgd_scvx" not in table

    def test_empirical_points_respect_the_bound(self, capsys, tmp_path):
        argv = ["check-bounds", "--empirical", "--preset", "quadratic", "--out", str(tmp_path), "-q",
                "--set", "experiment.algorithms=['pcsgd']"] + SMALL
        assert cli.dispatch(argv) == 0
        empirical = _stdout_json(capsys)["empirical"]
        assert empirical["pcsgd"]["violations"] == 0
        assert (tmp_path / "pcsgd.csv").exists()


class TestErrors:
    def test_unknown_key(self, capsys, tmp_path):
        code = cli.dispatch(["run", "--preset", "quadratic", "--out", str(tmp_path), "--set", "optimzer.c=1.0"])
        assert code == 2
        err = capsys.readouterr().err
        assert "category=config" in err
        assert "optimzer.c" in err

    def test_numerical_failure_exit_status(self, capsys, tmp_path, monkeypatch):
        def diverge(context, arguments):
            raise DivergenceError("iterate left every bounded set", step=17)

        monkeypatch.setitem(cli.HANDLERS, "oracle", diverge)
        assert cli.dispatch(["oracle", "--preset", "quadratic", "--out", str(tmp_path)]) == 3
        assert "category=divergence" in capsys.readouterr().err

    def test_unknown_preset(self, capsys, tmp_path):
        assert cli.dispatch(["oracle", "--preset", "nope", "--out", str(tmp_path)]) == 2
