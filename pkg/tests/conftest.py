"""Shared fixtures: the scalar quadratic instance and small experiment configs."""

import numpy as np
import pytest

from perfclip.analysis.oracles import QuadraticInstance
from perfclip.config import Settings
from perfclip.harness.schema import load_config
from perfclip.models.distributions import bernoulli_linear_shift
from perfclip.models.losses import quadratic_scalar_loss
from perfclip.presets import get_preset


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def quad_instance():
    """p = 0.1, a = 10, b = 1, beta = 0.01, c = 1."""
    return QuadraticInstance(p=0.1, a=10.0, b=1.0, beta=0.01, c=1.0)


@pytest.fixture
def quad_loss():
    return quadratic_scalar_loss(10.0)


@pytest.fixture
def quad_dist():
    return bernoulli_linear_shift(0.1, 1.0, 0.01)


@pytest.fixture
def settings():
    return Settings(WORKERS=1, CHUNK_SIZE=32, STREAM_BLOCK=256)


@pytest.fixture
def small_config():
    """The quadratic preset cut down to a few hundred steps."""

    def build(*overrides, preset="quadratic"):
        base = [
            "experiment.T=400",
            "experiment.n_trials=8",
            "experiment.thinning=20",
        ]
        return load_config(preset=get_preset(preset), overrides=base + list(overrides))

    return build
