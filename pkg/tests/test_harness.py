"""Configuration, trial runner, aggregation and result files."""

import json

import numpy as np
import pytest

from perfclip.algorithms.streams import TrialStreams
from perfclip.algorithms.trajectory import TrialResult, run_trajectory
from perfclip.errors import ConfigError, FitError, InvalidInputError, StorageError
from perfclip.harness.metrics import (
    aggregate,
    empirical_error_bound,
    fit_decay_exponent,
    plateau,
    running_min,
    trend_slope,
)
from perfclip.harness.output import emit_results, read_table, write_table
from perfclip.harness.resources import ExperimentResources, candidate_points
from perfclip.harness.runner import chunk_trials, run_trials
from perfclip.harness.schema import (
    apply_overrides,
    load_config,
    parse_override,
    validate_config,
    with_updates,
)
from perfclip.presets import PRESETS, get_preset


# -----------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------


class TestSchema:
    def test_defaults(self):
        config = validate_config({})
        assert config.experiment.T == 100000
        assert config.optimizer.theta0 == 5.0
        assert config.privacy.strict is False

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError) as info:
            validate_config({"optimzer": {"c": 1.0}})
        assert info.value.key == "optimzer.c"

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError) as info:
            validate_config({"optimizer": {"clip": 1.0}})
        assert info.value.key == "optimizer.clip"

    def test_invalid_value_is_named(self):
        with pytest.raises(ConfigError) as info:
            validate_config({"distribution": {"p": 0.7}})
        assert info.value.key == "distribution.p"

    def test_threshold_order(self):
        with pytest.raises(ConfigError):
            validate_config({"optimizer": {"c1": 2.0, "c2": 1.0}})

    def test_constant_schedule_needs_gamma(self):
        with pytest.raises(ConfigError):
            validate_config({"optimizer": {"schedule": "constant"}})

    def test_calibration_needs_epsilon(self):
        with pytest.raises(ConfigError):
            validate_config({"privacy": {"calibrate": True}})

    def test_parse_override(self):
        assert parse_override("optimizer.c=2.5") == (["optimizer", "c"], 2.5)
        assert parse_override("experiment.algorithms=['pcsgd']") == (["experiment", "algorithms"], ["pcsgd"])
        assert parse_override("oracle.kind=rrm") == (["oracle", "kind"], "rrm")
        assert parse_override("optimizer.unbounded=true") == (["optimizer", "unbounded"], True)

    @pytest.mark.parametrize("text", ["optimizer.c", "c=1.0"])
    def test_malformed_override(self, text):
        with pytest.raises(ConfigError):
            parse_override(text)

    def test_overrides_do_not_mutate(self):
        doc = {"optimizer": {"c": 1.0}}
        out = apply_overrides(doc, ["optimizer.c=3.0", "loss.a=2.0"])
        assert doc == {"optimizer": {"c": 1.0}}
        assert out == {"optimizer": {"c": 3.0}, "loss": {"a": 2.0}}

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text('[experiment]\nT = 500\nalgorithms = ["pcsgd"]\n[optimizer]\nc = 2.0\n', encoding="utf-8")
        config = load_config(path, get_preset("quadratic"), ["optimizer.c=3.0"])
        assert config.experiment.T == 500
        assert config.experiment.algorithms == ["pcsgd"]
        assert config.optimizer.c == 3.0
        assert config.loss.a == 10.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            load_config(tmp_path / "missing.toml")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[experiment\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_with_updates_revalidates(self, small_config):
        config = small_config()
        assert with_updates(config, {"distribution.beta": 0.05}).distribution.beta == 0.05
        with pytest.raises(ConfigError):
            with_updates(config, {"distribution.p": 0.9})

    def test_presets_validate(self):
        for name in PRESETS:
            load_config(preset=get_preset(name))

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            get_preset("quadratics")


# -----------------------------------------------------------------------
# Resources
# -----------------------------------------------------------------------


class TestResources:
    def test_quadratic_constants(self, small_config):
        resources = ExperimentResources(small_config())
        k = resources.constants
        assert k.mu == 1.0
        assert k.L == 10.0
        assert k.mu_tilde == pytest.approx(0.9)
        assert k.G == pytest.approx(19.0)

    def test_closed_form_oracle(self, small_config):
        oracle = ExperimentResources(small_config()).oracle
        assert oracle.theta_ps[0] == pytest.approx(-1.11111, abs=1e-5)
        assert oracle.theta_inf[0] == pytest.approx(-0.12346, abs=1e-5)
        assert oracle.bias == pytest.approx(0.97547, abs=1e-5)

    def test_oracle_failure_is_a_config_error(self, small_config):
        resources = ExperimentResources(small_config("distribution.beta=0.2"))
        with pytest.raises(ConfigError) as info:
            resources.oracle
        assert info.value.key == "oracle.kind"

    def test_closed_form_needs_quadratic(self, small_config):
        resources = ExperimentResources(small_config("loss.kind='nonconvex'"))
        with pytest.raises(ConfigError):
            resources.oracle

    def test_theta0_length(self, small_config):
        resources = ExperimentResources(small_config("optimizer.theta0=[1.0, 2.0]"))
        with pytest.raises(ConfigError):
            resources.theta0

    def test_database_size_defaults_delta(self, small_config):
        config = small_config("distribution.kind='bernoulli-database'", "distribution.m=400", "privacy.epsilon=0.5")
        budget = ExperimentResources(config).budget()
        assert budget.m == 400
        assert budget.delta == pytest.approx(1.0 / 400)

    def test_calibrated_sigma(self, small_config):
        config = small_config("privacy.calibrate=true", "privacy.epsilon=0.1", "privacy.delta=1e-5",
                              "privacy.m=100000", "experiment.T=100000")
        assert ExperimentResources(config).sigma_dp == pytest.approx(0.10730, abs=1e-5)

    def test_auto_metric(self, small_config):
        assert ExperimentResources(small_config()).metric("pcsgd") == "distance_sq"
        config = small_config("oracle.kind='none'")
        assert ExperimentResources(config).metric("pcsgd") == "grad_norm_sq"

    def test_candidate_points_cover_corners(self, small_config):
        box = ExperimentResources(small_config()).measurement_box
        points = candidate_points(box, np.random.default_rng(0), n_random=8)
        assert {-10.0, 10.0} <= set(points[:, 0].tolist())


# -----------------------------------------------------------------------
# Metrics
# -----------------------------------------------------------------------


def _result(values, diverged=False, e_norm=0.0):
    values = np.asarray(values, dtype=np.float64)
    return TrialResult("pcsgd", 0, np.arange(values.size) * 10, {"distance_sq": values}, np.zeros(1),
                       diverged=diverged, max_e_norm=e_norm)


class TestMetrics:
    def test_aggregate_mean_and_stderr(self):
        results = [_result([1.0, 2.0]), _result([3.0, 6.0])]
        metrics = aggregate(results, "distance_sq")
        np.testing.assert_allclose(metrics.mean, [2.0, 4.0])
        np.testing.assert_allclose(metrics.stderr, [1.0, 2.0])
        assert metrics.n == 2

    def test_single_trial_has_zero_stderr(self):
        metrics = aggregate([_result([1.0, 2.0])], "distance_sq")
        np.testing.assert_array_equal(metrics.stderr, [0.0, 0.0])

    def test_diverged_trials_are_excluded(self):
        results = [_result([1.0, 1.0]), _result([np.nan, np.nan], diverged=True)]
        metrics = aggregate(results, "distance_sq")
        assert metrics.n == 1
        assert metrics.diverged_count == 1
        np.testing.assert_array_equal(metrics.mean, [1.0, 1.0])

    def test_missing_series(self):
        with pytest.raises(InvalidInputError):
            aggregate([_result([1.0])], "grad_norm_sq")

    def test_decay_exponent_of_inverse_t(self):
        t = np.arange(0, 2001, 20)
        values = np.where(t > 0, 5.0 / np.maximum(t, 1), 99.0)
        fit = fit_decay_exponent(t, values)
        assert fit.slope == pytest.approx(-1.0, abs=1e-9)
        assert fit.n_points == 50

    def test_decay_exponent_of_constant(self):
        t = np.arange(1, 101)
        assert fit_decay_exponent(t, np.full(100, 3.0)).slope == pytest.approx(0.0, abs=1e-12)

    def test_decay_needs_enough_points(self):
        with pytest.raises(FitError):
            fit_decay_exponent(np.arange(1, 11), np.ones(10))

    def test_decay_needs_positive_values(self):
        with pytest.raises(FitError):
            fit_decay_exponent(np.arange(1, 41), np.zeros(40))

    def test_plateau(self):
        values = np.concatenate([np.linspace(10.0, 1.0, 90), np.full(10, 0.5)])
        assert plateau(values, 0.1) == pytest.approx(0.5)
        assert plateau(np.array([np.nan, 2.0, 4.0]), 1.0) == pytest.approx(3.0)

    def test_running_min(self):
        np.testing.assert_array_equal(running_min([3.0, 1.0, 2.0, 0.5]), [3.0, 1.0, 1.0, 0.5])

    def test_trend_slope(self):
        t = np.arange(10.0)
        assert trend_slope(t, 2.0 * t + 1.0) == pytest.approx(2.0)

    def test_empirical_error_bound(self):
        results = [_result([1.0], e_norm=2.0), _result([1.0], e_norm=5.0), _result([1.0], diverged=True, e_norm=9.0)]
        assert empirical_error_bound(results) == 10.0


# -----------------------------------------------------------------------
# Runner
# -----------------------------------------------------------------------


class TestRunner:
    def test_chunking(self):
        assert chunk_trials(5, 2) == [[0, 1], [2, 3], [4]]

    def test_initial_point_is_exact(self, small_config, settings):
        run = run_trials(small_config("experiment.algorithms=['pcsgd']"), settings)
        metrics = run.metrics["pcsgd"]
        assert metrics.t[0] == 0
        assert metrics.mean[0] == pytest.approx((5.0 + 10.0 / 9.0) ** 2, rel=1e-12)
        assert metrics.stderr[0] == 0.0
        assert metrics.t.size == 400 // 20 + 1

    @pytest.mark.parametrize("workers", [2, 8])
    def test_results_do_not_depend_on_workers(self, small_config, tmp_path, workers):
        from perfclip.config import Settings

        config = small_config("experiment.n_trials=32", "optimizer.sigma_dp=0.3")
        chunked = Settings(CHUNK_SIZE=4, STREAM_BLOCK=64)
        emit_results(run_trials(config, chunked, workers=1), tmp_path / "one")
        emit_results(run_trials(config, chunked, workers=workers), tmp_path / "many")
        for name in ("pcsgd.csv", "dicesgd.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "many" / name).read_bytes()

    def test_chunk_size_does_not_change_trials(self, small_config):
        from perfclip.config import Settings

        config = small_config("experiment.n_trials=6", "experiment.algorithms=['pcsgd']")
        a = run_trials(config, Settings(CHUNK_SIZE=6, STREAM_BLOCK=64))
        b = run_trials(config, Settings(CHUNK_SIZE=2, STREAM_BLOCK=64))
        for ra, rb in zip(a.results["pcsgd"], b.results["pcsgd"]):
            np.testing.assert_array_equal(ra.final_theta, rb.final_theta)

    def test_single_trial_matches_trajectory(self, small_config, settings):
        config = small_config("experiment.n_trials=1", "experiment.T=10", "experiment.thinning=1",
                              "experiment.algorithms=['pcsgd']")
        run = run_trials(config, settings)
        resources = run.resources
        single = run_trajectory(
            "pcsgd", resources.optimizer_config("pcsgd"), resources.loss, resources.distribution, 10,
            TrialStreams(config.experiment.seed, [0], settings.STREAM_BLOCK), resources.recorder(), resources.theta0,
        )
        np.testing.assert_array_equal(run.metrics["pcsgd"].mean, single.series["distance_sq"])

    def test_seed_changes_results(self, small_config, settings):
        a = run_trials(small_config("experiment.algorithms=['pcsgd']"), settings)
        b = run_trials(small_config("experiment.algorithms=['pcsgd']", "experiment.seed=1"), settings)
        assert not np.array_equal(a.metrics["pcsgd"].mean[1:], b.metrics["pcsgd"].mean[1:])

    def test_dicesgd_error_bound_is_recorded(self, small_config, settings):
        run = run_trials(small_config(), settings)
        assert run.error_bound_M == pytest.approx(2.0 * run.metrics["dicesgd"].max_e_norm)
        assert "e_norm_sq" in run.metrics["dicesgd"].series_means

    def test_bound_overlay(self, small_config, settings):
        config = small_config("bounds.overlay=true", "experiment.algorithms=['pcsgd']")
        metrics = run_trials(config, settings).metrics["pcsgd"]
        assert metrics.bound is not None
        assert metrics.bound[0] == pytest.approx(metrics.mean[0])
        assert np.all(metrics.mean - 3.0 * metrics.stderr <= metrics.bound)

    def test_overlay_skipped_without_dicesgd_constants(self, small_config, settings):
        config = small_config("bounds.overlay=true", "experiment.metric='shadow_distance_sq'",
                              "experiment.algorithms=['dicesgd']")
        assert run_trials(config, settings).metrics["dicesgd"].bound is None

    def test_divergent_configuration_is_flagged(self, small_config, settings):
        config = small_config("experiment.algorithms=['sgd']", "experiment.T=500", "distribution.beta=0.15", "oracle.kind='none'",
                              "optimizer.unbounded=true", "optimizer.schedule='constant'", "optimizer.gamma=0.5")
        metrics = run_trials(config, settings).metrics["sgd"]
        assert metrics.diverged_count == 8
        assert metrics.n == 0


# -----------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------


class TestOutput:
    def test_emitted_tables_round_trip(self, small_config, settings, tmp_path):
        run = run_trials(small_config(), settings)
        written = emit_results(run, tmp_path)
        assert {p.name for p in written} == {"pcsgd.csv", "dicesgd.csv", "metadata.json", "config.json"}

        table = read_table(tmp_path / "pcsgd.csv")
        assert list(table) == ["t", "mean", "stderr", "n"]
        np.testing.assert_array_equal(table["mean"], run.metrics["pcsgd"].mean)
        assert "e_norm_sq_mean" in read_table(tmp_path / "dicesgd.csv")

        metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
        assert metadata["seed"] == 0
        assert metadata["config"]["experiment"]["T"] == 400
        assert metadata["measured"]["G"] == pytest.approx(19.0)

    def test_rerun_from_metadata_is_identical(self, small_config, settings, tmp_path):
        run = run_trials(small_config(), settings)
        emit_results(run, tmp_path / "first")
        again = run_trials(load_config(tmp_path / "first" / "metadata.json"), settings)
        emit_results(again, tmp_path / "second")
        for name in ("pcsgd.csv", "dicesgd.csv"):
            first = (tmp_path / "first" / name).read_bytes()
            assert first == (tmp_path / "second" / name).read_bytes()

    def test_empty_table_is_refused(self):
        with pytest.raises(InvalidInputError):
            write_table([], "unused.csv")

    def test_unwritable_directory(self, small_config, settings, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        run = run_trials(small_config("experiment.algorithms=['pcsgd']"), settings)
        with pytest.raises(StorageError):
            emit_results(run, blocker)
