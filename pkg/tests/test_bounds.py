"""Convergence bound evaluators."""

import math

import numpy as np
import pytest

from perfclip.analysis.bounds import (
    DiceBoundParams,
    NcvxBoundParams,
    ScvxBoundParams,
    bias_upper_scvx,
    check_dice_schedule,
    dice_ncvx_bias,
    ncvx_bias,
    thm1_curve,
    thm1_rhs,
    thm3_rhs,
    thm4_curve,
    thm4_leading_term,
    thm4_rhs,
    thm5_rhs,
)
from perfclip.core.schedules import ConstantSchedule, PolynomialSchedule
from perfclip.errors import InvalidInputError, PreconditionError


def _scvx(**kwargs):
    values = dict(mu_tilde=0.9, c=1.0, G=19.0, d=1, sigma_dp=0.0, initial_gap_sq=(5.0 + 10.0 / 9.0) ** 2,
                  schedule=PolynomialSchedule(10.0, 100.0))
    values.update(kwargs)
    return ScvxBoundParams(**values)


def _dice(**kwargs):
    values = dict(mu_tilde=0.9, G=3.0, B=0.9, d=1, sigma_dp=0.0, L=10.0, M=1.0, beta=0.01, b=0.5,
                  b_bar=250.0, initial_gap_sq=25.0, schedule=PolynomialSchedule(10.0, 100.0))
    values.update(kwargs)
    return DiceBoundParams(**values)


class TestStronglyConvexPcsgd:
    def test_bias_floor(self):
        params = _scvx()
        assert bias_upper_scvx(params) == pytest.approx(8.0 * 18.0 ** 2 / 0.81, rel=1e-14)
        assert bias_upper_scvx(_scvx(c=25.0)) == 0.0

    def test_value_at_zero(self):
        """t = 0: |1 - mu gamma_1| gap + 2 c1 gamma_1 / mu + bias."""
        params = _scvx()
        g1 = 10.0 / 101.0
        expected = abs(1.0 - 0.9 * g1) * params.initial_gap_sq + 2.0 * params.c1 / 0.9 * g1 + bias_upper_scvx(params)
        assert thm1_rhs(params, 0) == pytest.approx(expected, rel=1e-12)

    def test_decreases_to_the_bias_floor(self):
        params = _scvx()
        curve = thm1_curve(params, [0, 10, 100, 1000, 10000, 99999])
        assert np.all(np.diff(curve) < 0)
        assert curve[-1] > bias_upper_scvx(params)
        assert curve[-1] - bias_upper_scvx(params) < 0.2

    def test_curve_matches_pointwise(self):
        params = _scvx(sigma_dp=0.3)
        ts = np.array([0, 5, 50, 500])
        np.testing.assert_allclose(thm1_curve(params, ts), [thm1_rhs(params, int(t)) for t in ts], rtol=1e-14)

    def test_noise_raises_the_bound(self):
        assert thm1_rhs(_scvx(sigma_dp=1.0), 1000) > thm1_rhs(_scvx(), 1000)

    def test_schedule_conditions_enforced(self):
        with pytest.raises(PreconditionError, match="condition \\(ii\\)"):
            thm1_rhs(_scvx(schedule=ConstantSchedule(3.0)), 10)

    def test_needs_positive_mu_tilde(self):
        with pytest.raises(PreconditionError):
            _scvx(mu_tilde=-0.1)

    def test_negative_constants(self):
        with pytest.raises(InvalidInputError):
            _scvx(G=-1.0)


class TestNonconvexPcsgd:
    def test_bias_constant(self):
        """l_max = 1, beta = 0.1, sigma0 = 1, sigma1 = 0, G = 2, c = 1: b = 2.18."""
        params = NcvxBoundParams(delta0=1.0, L=1.0, sigma0=1.0, sigma1=0.0, loss_max=1.0, beta=0.1, c=1.0, G=2.0)
        assert ncvx_bias(params) == pytest.approx(2.18, rel=1e-14)

    def test_sqrt_step_specialisation(self):
        """With gamma = 1/sqrt(T) the weighted average equals the closed specialisation."""
        params = NcvxBoundParams(delta0=0.7, L=1.0, sigma0=0.6, sigma1=0.0, loss_max=1.0, beta=0.05, c=0.5, G=0.6)
        bound = thm3_rhs(params, 10000)
        assert bound.weighted_average == pytest.approx(bound.sqrt_specialization, rel=1e-12)
        assert bound.summed == pytest.approx(bound.weighted_average * 10000 * 0.01, rel=1e-12)

    def test_decays_to_bias(self):
        params = NcvxBoundParams(delta0=1.0, L=1.0, sigma0=0.6, sigma1=0.0, loss_max=1.0, beta=0.0, c=1.0, G=0.6)
        values = [thm3_rhs(params, T).sqrt_specialization for T in (100, 10000, 1000000)]
        assert values[0] > values[1] > values[2]
        assert thm3_rhs(params, 100).b == 0.0

    def test_step_condition(self):
        params = NcvxBoundParams(
            delta0=1.0, L=1.0, sigma0=0.6, sigma1=0.0, loss_max=1.0, beta=0.0, c=1.0, G=0.6,
            schedule=ConstantSchedule(0.9),
        )
        with pytest.raises(PreconditionError):
            thm3_rhs(params, 100)


class TestStronglyConvexDicesgd:
    def test_conditions_hold_on_reference_instance(self):
        assert check_dice_schedule(_dice(), 10000) == []
        assert math.isfinite(thm4_rhs(_dice(), 10000))

    def test_small_step_constant_fails_condition_one(self):
        params = _dice(b=0.01)
        failed = check_dice_schedule(params, 100)
        assert any(item.startswith("(i)") for item in failed)
        with pytest.raises(PreconditionError, match="\\(i\\)"):
            thm4_rhs(params, 100)

    def test_ratio_condition_fails_for_small_b_bar(self):
        failed = check_dice_schedule(_dice(b_bar=1.0), 1000)
        assert any(item.startswith("(iii)") for item in failed)

    def test_leading_term_dominates_asymptotically(self):
        params = _dice(b_bar=30000.0)
        t = 1000000
        ratio = thm4_rhs(params, t) / thm4_leading_term(params, t)
        assert 1.0 < ratio < 1.001

    def test_bounds_leading_term(self):
        params = _dice()
        ts = np.array([0, 100, 1000, 9999])
        lead = np.array([thm4_leading_term(params, int(t)) for t in ts])
        assert np.all(thm4_curve(params, ts) >= lead)


class TestNonconvexDicesgd:
    def test_bias_constant(self):
        assert dice_ncvx_bias(1.0, 1.0, 0.5, 1.0, 4) == pytest.approx(12.0, rel=1e-14)

    def test_formula(self):
        T = 10000
        gamma = 0.01
        value = thm5_rhs(1.0, 1.0, 0.0, 1.0, 0.05, 1, 1.0, 1.0, 0.6, 0.0, 2.0, T)
        expected = 4.0 / (T * gamma) + 8.0 * 0.05 + 2.0 * gamma * 0.36 + 2.0 * 4.0 * gamma ** 2
        assert value == pytest.approx(expected, rel=1e-14)

    def test_step_condition(self):
        with pytest.raises(PreconditionError):
            thm5_rhs(1.0, 1.0, 0.0, 1.0, 0.05, 1, 1.0, 10.0, 0.6, 0.0, 2.0, 16)
