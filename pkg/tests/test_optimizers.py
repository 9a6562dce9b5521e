"""SGD, PCSGD and DiceSGD steps, random streams and the trajectory runner."""

import math

import numpy as np
import pytest

from perfclip.algorithms.optimizers import (
    DicesgdState,
    OptimizerConfig,
    PcsgdState,
    dicesgd_step,
    initial_state,
    pcsgd_step,
    sgd_step,
)
from perfclip.algorithms.streams import TrialStreams, trial_generator
from perfclip.algorithms.trajectory import TrajectoryRecorder, run_batch, run_trajectory
from perfclip.core.operators import BoxRegion
from perfclip.core.schedules import ConstantSchedule, PolynomialSchedule
from perfclip.errors import DivergenceError, InvalidInputError, UnsupportedConfigurationError
from perfclip.models.distributions import bernoulli_linear_shift


def _config(**kwargs):
    kwargs.setdefault("schedule", PolynomialSchedule(10.0, 100.0))
    return OptimizerConfig(**kwargs)


class TestOptimizerConfig:
    def test_dicesgd_threshold_order(self):
        with pytest.raises(InvalidInputError):
            _config(clip_c1=2.0, clip_c2=1.0)

    def test_nonpositive_threshold(self):
        with pytest.raises(InvalidInputError):
            _config(clip_c=0.0)

    def test_negative_noise(self):
        with pytest.raises(InvalidInputError):
            _config(sigma_dp=-1.0)

    def test_unknown_algorithm(self):
        with pytest.raises(InvalidInputError):
            initial_state("adam", [0.0])


class TestPcsgdStep:
    def test_single_step_by_hand(self, quad_loss, quad_dist):
        """theta = 5, z = b - beta theta: grad = 0.95 * 10 + 5 = 14.5, clipped to 1."""
        config = _config(clip_c=1.0, region=BoxRegion.cube(-10.0, 10.0, 1))

        class Fixed:
            def draws(self, shape, noise):
                return np.zeros(shape[:-1]), None

        state = pcsgd_step(PcsgdState(np.array([5.0])), config, quad_loss, quad_dist, Fixed())
        np.testing.assert_allclose(state.theta, [5.0 - 10.0 / 101.0])
        assert state.t == 1
        assert float(state.grad_norm) == pytest.approx(14.5)

    def test_infinite_threshold_matches_sgd(self, quad_loss, quad_dist):
        config = _config(clip_c=math.inf)
        a = PcsgdState(np.array([5.0]))
        b = PcsgdState(np.array([5.0]))
        ra, rb = np.random.default_rng(42), np.random.default_rng(42)
        for _ in range(200):
            a = pcsgd_step(a, config, quad_loss, quad_dist, ra)
            b = sgd_step(b, config, quad_loss, quad_dist, rb)
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_iterates_stay_in_box(self, quad_loss, quad_dist):
        box = BoxRegion.cube(-1.0, 1.0, 1)
        config = _config(clip_c=5.0, schedule=ConstantSchedule(1.5), region=box)
        state = PcsgdState(np.array([0.0]))
        rng = np.random.default_rng(42)
        for _ in range(500):
            state = pcsgd_step(state, config, quad_loss, quad_dist, rng)
            assert box.contains(state.theta)

    def test_noise_is_added(self, quad_loss, quad_dist):
        quiet = _config(clip_c=1.0)
        noisy = _config(clip_c=1.0, sigma_dp=0.5)
        s0 = PcsgdState(np.array([5.0]))
        a = pcsgd_step(s0, quiet, quad_loss, quad_dist, np.random.default_rng(3))
        b = pcsgd_step(s0, noisy, quad_loss, quad_dist, np.random.default_rng(3))
        assert not np.array_equal(a.theta, b.theta)

    def test_batched_rows_match_single_runs(self, quad_loss, quad_dist):
        """A batch of trials gives each row exactly what it would get alone."""
        config = _config(clip_c=1.0, sigma_dp=0.2)
        batch = TrialStreams(7, [0, 1, 2], block=16, noise_dim=1)
        state = PcsgdState(np.full((3, 1), 5.0))
        for _ in range(50):
            state = pcsgd_step(state, config, quad_loss, quad_dist, batch)
        for row in range(3):
            alone = TrialStreams(7, [row], block=16, noise_dim=1)
            single = PcsgdState(np.full((1, 1), 5.0))
            for _ in range(50):
                single = pcsgd_step(single, config, quad_loss, quad_dist, alone)
            np.testing.assert_array_equal(single.theta[0], state.theta[row])


class TestDicesgdStep:
    def test_error_feedback_identity(self, quad_loss, quad_dist):
        """e_{t+1} - e_t = grad - v exactly and theta moves by -gamma v without noise."""
        config = _config(clip_c1=1.0, clip_c2=1.0)
        state = initial_state("dicesgd", [5.0])
        rng = np.random.default_rng(42)
        for _ in range(2000):
            nxt = dicesgd_step(state, config, quad_loss, quad_dist, rng)
            gamma = config.schedule.value(nxt.t)
            np.testing.assert_allclose(nxt.e - state.e, nxt.grad - nxt.update, atol=1e-12)
            np.testing.assert_allclose(nxt.theta, state.theta - gamma * nxt.update, atol=1e-12)
            state = nxt

    def test_shadow_iterate_follows_plain_sgd(self, quad_loss, quad_dist):
        """With a constant step, theta - gamma e moves by -gamma grad each step."""
        gamma = 0.01
        config = _config(schedule=ConstantSchedule(gamma), clip_c1=0.5, clip_c2=1.0)
        state = initial_state("dicesgd", [5.0])
        rng = np.random.default_rng(42)
        for _ in range(2000):
            nxt = dicesgd_step(state, config, quad_loss, quad_dist, rng)
            shadow_move = (nxt.theta - gamma * nxt.e) - (state.theta - gamma * state.e)
            np.testing.assert_allclose(shadow_move, -gamma * nxt.grad, atol=1e-12)
            state = nxt

    def test_update_is_bounded(self, quad_loss, quad_dist):
        config = _config(clip_c1=1.0, clip_c2=2.0)
        state = initial_state("dicesgd", [5.0])
        rng = np.random.default_rng(42)
        for _ in range(500):
            state = dicesgd_step(state, config, quad_loss, quad_dist, rng)
            assert np.linalg.norm(state.update) <= 3.0 + 1e-12

    def test_rejects_bounded_region(self, quad_loss, quad_dist):
        config = _config(region=BoxRegion.cube(-10.0, 10.0, 1))
        with pytest.raises(UnsupportedConfigurationError):
            dicesgd_step(DicesgdState(np.array([0.0]), np.array([0.0])), config, quad_loss, quad_dist,
                         np.random.default_rng(0))


class TestStreams:
    def test_trial_streams_are_independent_of_grouping(self):
        grouped = TrialStreams(11, [3, 4], block=8)
        alone = TrialStreams(11, [4], block=8)
        ours = [grouped.draws((2, 1), False)[0][1] for _ in range(20)]
        theirs = [alone.draws((1, 1), False)[0][0] for _ in range(20)]
        np.testing.assert_array_equal(ours, theirs)

    def test_trials_differ(self):
        a = trial_generator(5, 0).random(10)
        b = trial_generator(5, 1).random(10)
        assert not np.array_equal(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            TrialStreams(0, [0, 1]).draws((3, 1), False)

    def test_noise_needs_dimension(self):
        with pytest.raises(InvalidInputError):
            TrialStreams(0, [0], noise_dim=0).draws((1, 1), True)


class TestTrajectory:
    def test_record_grid(self, quad_loss, quad_dist):
        recorder = TrajectoryRecorder(quad_loss, quad_dist, theta_ref=[-10.0 / 9.0], thinning=7)
        result = run_trajectory("pcsgd", _config(clip_c=1.0), quad_loss, quad_dist, 50,
                                TrialStreams(0, [0]), recorder, [5.0])
        np.testing.assert_array_equal(result.t, np.arange(8) * 7)
        assert result.series["distance_sq"].shape == (8,)
        assert result.series["distance_sq"][0] == pytest.approx((5.0 + 10.0 / 9.0) ** 2, rel=1e-12)

    def test_series_names(self, quad_loss, quad_dist):
        recorder = TrajectoryRecorder(quad_loss, quad_dist, theta_ref=[0.0])
        assert recorder.names("pcsgd") == ["distance_sq", "grad_norm_sq", "performative_risk"]
        assert "e_norm_sq" in recorder.names("dicesgd")
        assert "shadow_distance_sq" in recorder.names("dicesgd")

    def test_unknown_series(self, quad_loss, quad_dist):
        with pytest.raises(InvalidInputError):
            TrajectoryRecorder(quad_loss, quad_dist, series=["speed"])

    def test_divergent_rows_are_flagged(self, quad_loss):
        """a beta > 1 makes the unclipped mean field expansive."""
        dist = bernoulli_linear_shift(0.1, 1.0, 0.15)
        recorder = TrajectoryRecorder(quad_loss, dist, theta_ref=[0.0], thinning=10)
        results = run_batch("sgd", _config(schedule=ConstantSchedule(0.5)), quad_loss, dist, 500,
                            TrialStreams(0, [0, 1]), recorder, [5.0])
        for r in results:
            assert r.diverged
            assert r.diverged_at is not None and r.diverged_at < 500
            assert np.isnan(r.series["distance_sq"][-1])
            assert np.all(np.isfinite(r.final_theta))

    def test_divergence_can_raise(self, quad_loss):
        dist = bernoulli_linear_shift(0.1, 1.0, 0.15)
        recorder = TrajectoryRecorder(quad_loss, dist, thinning=10)
        with pytest.raises(DivergenceError):
            run_trajectory("sgd", _config(schedule=ConstantSchedule(0.5)), quad_loss, dist, 500,
                           np.random.default_rng(0), recorder, [5.0])

    def test_pcsgd_settles_near_clipped_fixed_point(self, quad_loss, quad_dist):
        """Clipped iterates approach theta_inf rather than theta_PS."""
        theta_inf = -0.1 / (0.9 * 0.9)
        recorder = TrajectoryRecorder(quad_loss, quad_dist, theta_ref=[theta_inf], thinning=1000)
        results = run_batch("pcsgd", _config(clip_c=1.0, region=BoxRegion.cube(-10.0, 10.0, 1)),
                            quad_loss, quad_dist, 20000, TrialStreams(1, range(16)), recorder, [5.0])
        final = np.mean([r.series["distance_sq"][-1] for r in results])
        assert final < 0.01
