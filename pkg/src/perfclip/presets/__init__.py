"""
Named experiment presets.

Each preset is a raw configuration document reproducing one of the published
experiments; a config file or --set overrides are applied on top of it.
"""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Dict

from ..errors import ConfigError

logger = logging.getLogger("perfclip.presets")


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    config: Dict[str, Any]


_QUADRATIC = {
    "experiment": {
        "name": "quadratic",
        "algorithms": ["pcsgd", "dicesgd"],
        "T": 100000,
        "n_trials": 100,
        "thinning": 100,
    },
    "loss": {"kind": "quadratic", "a": 10.0},
    "distribution": {"kind": "bernoulli", "p": 0.1, "b": 1.0, "beta": 0.01},
    "optimizer": {
        "schedule": "polynomial",
        "a0": 10.0,
        "a1": 100.0,
        "c": 1.0,
        "c1": 1.0,
        "c2": 1.0,
        "theta0": 5.0,
        "region_low": -10.0,
        "region_high": 10.0,
    },
    "oracle": {"kind": "closed-form"},
}


def _derive(base: Dict[str, Any], **tables: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for table, values in tables.items():
        out.setdefault(table, {}).update(values)
    return out


PRESETS = {
    "quadratic": Preset(
        name="quadratic",
        description="Scalar quadratic loss under a Bernoulli shift: PCSGD clipping bias vs DiceSGD",
        config=_QUADRATIC,
    ),
    "bias-amplification": Preset(
        name="bias-amplification",
        description="Clipping bias of noiseless PCSGD as the sensitivity beta grows (a = 10)",
        config=_derive(
            _QUADRATIC,
            experiment={"name": "bias-amplification", "algorithms": ["pcsgd"], "n_trials": 20},
            sweep={"beta_grid": [0.0, 0.02, 0.04, 0.06, 0.08], "plateau_fraction": 0.1},
        ),
    ),
    "privacy-tradeoff": Preset(
        name="privacy-tradeoff",
        description="DP PCSGD with the optimal and the shift-unaware constant step across privacy budgets",
        config=_derive(
            _QUADRATIC,
            experiment={"name": "privacy-tradeoff", "algorithms": ["pcsgd"]},
            loss={"a": 1.0},
            distribution={"b": 6.0, "beta": 0.1},
            optimizer={"schedule": "optimal", "c": 2.32},
            privacy={"calibrate": True, "epsilon": 0.1, "delta": 1e-5, "m": 100000, "strict": False},
            sweep={"epsilon_grid": [0.01, 0.1]},
        ),
    ),
    "logistic": Preset(
        name="logistic",
        description="Strategic classification with ridge-regularised logistic regression on credit-like data",
        config={
            "experiment": {
                "name": "logistic",
                "algorithms": ["pcsgd", "dicesgd"],
                "T": 100000,
                "n_trials": 1,
                "thinning": 500,
            },
            "loss": {"kind": "logistic", "dim": 10},
            "distribution": {"kind": "strategic", "m": 15776, "beta": 0.01, "positive_fraction": 0.06624},
            "optimizer": {
                "schedule": "polynomial",
                "a0": 50.0,
                "a1": 5000.0,
                "c": 1.0,
                "c1": 1.0,
                "c2": 1.0,
                "theta0": 0.0,
                "unbounded": True,
            },
            "oracle": {"kind": "rrm"},
            "sweep": {"beta_grid": [0.001, 0.01, 0.1]},
        },
    ),
    "nonconvex": Preset(
        name="nonconvex",
        description="Bounded non-convex loss: running minimum of the squared stationarity gap",
        config={
            "experiment": {
                "name": "nonconvex",
                "algorithms": ["pcsgd", "dicesgd"],
                "T": 10000,
                "n_trials": 20,
                "thinning": 10,
                "metric": "grad_norm_sq",
            },
            "loss": {"kind": "nonconvex", "dim": 1},
            "distribution": {"kind": "bernoulli", "p": 0.3, "b": 2.0, "beta": 0.05},
            "optimizer": {
                "schedule": "constant",
                "gamma": 0.01,
                "c": 0.5,
                "c1": 0.5,
                "c2": 0.5,
                "theta0": 3.0,
                "unbounded": True,
            },
            "oracle": {"kind": "none"},
        },
    ),
}


def get_preset(name: str) -> Dict[str, Any]:
    """
    Raw config document of a preset (a copy).

    Raises:
        ConfigError: If no preset has that name
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(PRESETS)})", "preset")
    logger.debug(f"Using preset {name}")
    return copy.deepcopy(PRESETS[name].config)


__all__ = ["PRESETS", "Preset", "get_preset"]
