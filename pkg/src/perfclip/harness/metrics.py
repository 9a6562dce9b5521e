"""
Aggregation of trial results and rate fitting.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from ..algorithms.trajectory import TrialResult
from ..errors import FitError, InvalidInputError

logger = logging.getLogger("perfclip.harness.metrics")

MIN_FIT_POINTS = 10


@dataclass(frozen=True)
class DecayFit:
    """Least-squares slope of log(value) against log(t)."""

    slope: float
    stderr: float
    intercept: float
    n_points: int

    def band(self, z: float = 1.96):
        """Confidence band slope +/- z stderr."""
        return self.slope - z * self.stderr, self.slope + z * self.stderr


@dataclass
class AggregateMetrics:
    """
    Per-recorded-t statistics of one algorithm across trials.

    mean/stderr describe the primary metric; series_means holds the mean of
    every recorded series. Diverged trials are left out of every statistic.
    """

    algorithm: str
    metric: str
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n: int
    n_trials: int
    diverged_count: int
    series_means: Dict[str, np.ndarray] = field(default_factory=dict)
    series_stderr: Dict[str, np.ndarray] = field(default_factory=dict)
    bound: Optional[np.ndarray] = None
    decay: Optional[DecayFit] = None
    max_grad_norm: float = 0.0
    max_e_norm: float = 0.0

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1]) if self.mean.size else math.nan

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1]) if self.stderr.size else math.nan

    def summary(self) -> Dict[str, object]:
        out = {
            "metric": self.metric,
            "n_trials": self.n_trials,
            "n": self.n,
            "diverged_count": self.diverged_count,
            "final_mean": self.final_mean,
            "final_stderr": self.final_stderr,
            "max_grad_norm": self.max_grad_norm,
            "max_e_norm": self.max_e_norm,
        }
        if self.decay is not None:
            out["decay_slope"] = self.decay.slope
            out["decay_stderr"] = self.decay.stderr
        return out


def _mean_stderr(values: np.ndarray):
    n = values.shape[0]
    if n == 0:
        nan = np.full(values.shape[1:], np.nan)
        return nan, nan
    mean = values.mean(axis=0)
    if n == 1:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(n)


def aggregate(results: Sequence[TrialResult], metric: str) -> AggregateMetrics:
    """
    Mean and standard error per recorded t over non-diverged trials.

    Raises:
        InvalidInputError: If there are no results or the metric was not recorded
    """
    if not results:
        raise InvalidInputError("nothing to aggregate")
    first = results[0]
    if metric not in first.series:
        raise InvalidInputError(
            f"series '{metric}' was not recorded for {first.algorithm} (have: {', '.join(first.series) or 'none'})"
        )
    kept = [r for r in results if not r.diverged]
    diverged = len(results) - len(kept)
    if diverged:
        logger.warning(f"{diverged} of {len(results)} {first.algorithm} trials diverged and are excluded")

    means, errs = {}, {}
    for name in first.series:
        stacked = np.array([r.series[name] for r in kept]).reshape(len(kept), first.t.size)
        means[name], errs[name] = _mean_stderr(stacked)

    return AggregateMetrics(
        algorithm=first.algorithm,
        metric=metric,
        t=first.t.copy(),
        mean=means[metric],
        stderr=errs[metric],
        n=len(kept),
        n_trials=len(results),
        diverged_count=diverged,
        series_means=means,
        series_stderr=errs,
        max_grad_norm=max((r.max_grad_norm for r in kept), default=0.0),
        max_e_norm=max((r.max_e_norm for r in kept), default=0.0),
    )


def fit_decay_exponent(t, values, tail_fraction: float = 0.5) -> DecayFit:
    """
    Slope of log(value) against log(t) over the final tail_fraction of points with t > 0.

    Raises:
        FitError: If fewer than 10 points fall in the window or a value there is not positive
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise InvalidInputError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    t = np.asarray(t, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if t.shape != values.shape:
        raise InvalidInputError("t and values must have the same length")
    keep = t > 0
    t, values = t[keep], values[keep]
    n_tail = int(math.ceil(tail_fraction * t.size))
    t, values = t[t.size - n_tail:], values[values.size - n_tail:]
    if n_tail < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points in the tail window, got {n_tail}")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise FitError("non-positive values in the tail window; the series has plateaued, test the bias instead")

    res = stats.linregress(np.log(t), np.log(values))
    return DecayFit(float(res.slope), float(res.stderr), float(res.intercept), n_tail)


def plateau(values, fraction: float = 0.1) -> float:
    """Mean of the final fraction of finite recorded values."""
    if not 0.0 < fraction <= 1.0:
        raise InvalidInputError(f"fraction must lie in (0, 1], got {fraction}")
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise InvalidInputError("no finite values to average")
    n_tail = max(1, int(math.ceil(fraction * values.size)))
    return float(values[-n_tail:].mean())


def running_min(values) -> np.ndarray:
    """min_{s <= t} value_s (NaN entries are skipped)."""
    return np.fmin.accumulate(np.asarray(values, dtype=np.float64))


def empirical_error_bound(results: Sequence[TrialResult], factor: float = 2.0) -> float:
    """M estimate for the DiceSGD bound: factor times the largest ||e_t|| seen."""
    norms: List[float] = [r.max_e_norm for r in results if not r.diverged]
    return factor * max(norms, default=0.0)


def trend_slope(t, values) -> float:
    """Ordinary least-squares slope of value against t (no log transform)."""
    t = np.asarray(t, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = np.isfinite(values)
    if keep.sum() < 2:
        raise FitError("need at least two finite points for a trend")
    return float(stats.linregress(t[keep], values[keep]).slope)
