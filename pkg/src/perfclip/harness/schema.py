"""
Experiment configuration schema.

Configuration files are TOML with one table per module. Every table is a
pydantic model that forbids unknown keys, so a typo is an error naming the
dotted key instead of a silently ignored setting.
"""
import copy
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError, StorageError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("perfclip.harness.schema")

AlgorithmName = Literal["sgd", "pcsgd", "dicesgd"]
MetricName = Literal["auto", "distance_sq", "grad_norm_sq", "shadow_distance_sq", "performative_risk"]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(Section):
    name: str = "experiment"
    algorithms: List[AlgorithmName] = Field(default_factory=lambda: ["pcsgd", "dicesgd"], min_length=1)
    T: int = Field(default=100000, ge=1)
    n_trials: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    thinning: int = Field(default=100, ge=1)
    metric: MetricName = "auto"
    fit_tail: float = Field(default=0.5, gt=0.0, le=1.0)
    output_dir: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)


class LossSection(Section):
    kind: Literal["quadratic", "logistic", "nonconvex"] = "quadratic"
    a: float = Field(default=10.0, gt=0.0)
    eta: Optional[float] = Field(default=None, gt=0.0)  # None: 100 / m_train
    dim: int = Field(default=1, ge=1)


class DistributionSection(Section):
    kind: Literal["bernoulli", "bernoulli-database", "strategic", "database"] = "bernoulli"
    p: float = Field(default=0.1, gt=0.0, lt=0.5)
    b: float = 1.0
    beta: float = Field(default=0.01, ge=0.0)
    m: int = Field(default=15776, ge=2)
    csv: Optional[str] = None
    positive_fraction: float = Field(default=0.06624, gt=0.0, lt=1.0)
    separation: float = 1.0
    train_fraction: float = Field(default=0.7, gt=0.0, lt=1.0)
    data_seed: Optional[int] = Field(default=None, ge=0)


class OptimizerSection(Section):
    schedule: Literal["constant", "polynomial", "optimal", "naive"] = "polynomial"
    gamma: Optional[float] = Field(default=None, gt=0.0)
    a0: float = Field(default=10.0, gt=0.0)
    a1: float = Field(default=100.0, ge=0.0)
    c: float = Field(default=1.0, gt=0.0)
    c1: float = Field(default=1.0, gt=0.0)
    c2: float = Field(default=1.0, gt=0.0)
    sigma_dp: float = Field(default=0.0, ge=0.0)
    dp_multiplier: float = Field(default=math.sqrt(96.0), gt=0.0)
    region_low: float = -10.0
    region_high: float = 10.0
    unbounded: bool = False
    theta0: Union[float, List[float]] = 5.0

    @model_validator(mode="after")
    def _check(self):
        if self.c2 < self.c1:
            raise ValueError("c2 must be >= c1")
        if self.region_low > self.region_high:
            raise ValueError("region_low must be <= region_high")
        if self.schedule == "constant" and self.gamma is None:
            raise ValueError("a constant schedule needs gamma")
        return self


class PrivacySection(Section):
    calibrate: bool = False
    epsilon: Optional[float] = Field(default=None, gt=0.0)
    delta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)  # None: 1 / m
    m: Optional[int] = Field(default=None, ge=1)  # None: database size
    strict: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.calibrate and self.epsilon is None:
            raise ValueError("privacy calibration needs epsilon")
        return self


class OracleSection(Section):
    kind: Literal["closed-form", "rrm", "root", "none"] = "closed-form"
    target: Literal["ps", "inf"] = "ps"
    tol: float = Field(default=1e-8, gt=0.0)
    max_outer: int = Field(default=200, ge=1)
    mc_samples: int = Field(default=100000, ge=10)


class BoundsSection(Section):
    overlay: bool = False
    G: Optional[float] = Field(default=None, ge=0.0)  # None: measured on the region
    B: Optional[float] = Field(default=None, ge=0.0)
    M: Optional[float] = Field(default=None, ge=0.0)  # None: twice the largest ||e_t|| seen
    b: Optional[float] = Field(default=None, gt=0.0)
    b_bar: Optional[float] = Field(default=None, ge=0.0)


class SweepSection(Section):
    beta_grid: List[float] = Field(default_factory=lambda: [0.0, 0.02, 0.04, 0.06, 0.08])
    epsilon_grid: List[float] = Field(default_factory=lambda: [0.01, 0.1])
    plateau_fraction: float = Field(default=0.1, gt=0.0, le=1.0)


class ExperimentConfig(Section):
    """Full experiment configuration."""

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    loss: LossSection = Field(default_factory=LossSection)
    distribution: DistributionSection = Field(default_factory=DistributionSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    privacy: PrivacySection = Field(default_factory=PrivacySection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    bounds: BoundsSection = Field(default_factory=BoundsSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    def resolved(self) -> Dict[str, Any]:
        """Plain dict of every setting, defaults included."""
        return self.model_dump(mode="json")


def _unknown_keys(doc: Dict[str, Any], model: type, prefix: str = "") -> List[str]:
    found = []
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        field = model.model_fields.get(key)
        if field is None:
            if isinstance(value, dict) and value:
                dotted = f"{dotted}.{next(iter(value))}"
            found.append(dotted)
            continue
        sub = field.annotation
        if isinstance(value, dict) and isinstance(sub, type) and issubclass(sub, BaseModel):
            found.extend(_unknown_keys(value, sub, f"{dotted}."))
    return found


def parse_override(text: str):
    """
    Split "section.key=value" into (["section", "key"], value).

    The value is parsed as a TOML literal and falls back to a bare string.
    """
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form section.key=value", text)
    key, raw = text.split("=", 1)
    path = [part.strip() for part in key.strip().split(".")]
    if len(path) < 2 or not all(path):
        raise ConfigError(f"override key '{key}' must be a dotted path like optimizer.c", key)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return path, value


def apply_overrides(doc: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply dotted overrides to a raw config document (returns a new dict)."""
    doc = copy.deepcopy(doc)
    for text in overrides:
        path, value = parse_override(text)
        node = doc
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"'{'.'.join(path)}' overrides a non-table value", ".".join(path))
            node = child
        node[path[-1]] = value
        logger.debug(f"Override {'.'.join(path)} = {value!r}")
    return doc


def validate_config(doc: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw document.

    Raises:
        ConfigError: Naming the first unknown or invalid dotted key
    """
    unknown = _unknown_keys(doc, ExperimentConfig)
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'", unknown[0])
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"])
        raise ConfigError(f"invalid value for '{key}': {err['msg']}", key)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML config, a resolved-config JSON, or a run metadata JSON.

    Raises:
        StorageError: If the file cannot be read
        ConfigError: If it cannot be parsed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read config ({e.strerror})", str(path))
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON config: {e}")
        return doc.get("config", doc) if isinstance(doc, dict) else doc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed TOML config: {e}")


def merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Table-wise merge of two raw documents."""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[Dict[str, Any]] = None,
    overrides: Sequence[str] = (),
) -> ExperimentConfig:
    """
    Build a config from an optional preset, an optional file on top of it, then overrides.
    """
    doc: Dict[str, Any] = copy.deepcopy(preset) if preset else {}
    if path is not None:
        doc = merge(doc, read_config_file(path))
    doc = apply_overrides(doc, overrides)
    return validate_config(doc)


def with_updates(config: ExperimentConfig, updates: Dict[str, Any]) -> ExperimentConfig:
    """Copy of config with dotted keys replaced, re-validated."""
    doc = config.resolved()
    for dotted, value in updates.items():
        section, key = dotted.split(".", 1)
        doc[section][key] = value
    return validate_config(doc)
