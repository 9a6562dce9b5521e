"""
Finite databases of base samples, a synthetic credit-scoring generator and a CSV loader.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..errors import InvalidInputError, StorageError

logger = logging.getLogger("perfclip.models.datasets")


@dataclass(frozen=True)
class FiniteDatabase:
    """
    Fixed database D_0 of m base samples, one per row.

    Labelled databases store the binary label in the last column.
    """

    records: np.ndarray
    labeled: bool = False

    def __post_init__(self):
        records = np.array(self.records, dtype=np.float64)
        if records.ndim == 1:
            records = records[:, None]
        if records.ndim != 2 or records.shape[0] < 1:
            raise InvalidInputError("a database needs at least one record")
        if not np.all(np.isfinite(records)):
            raise InvalidInputError("database records must be finite")
        if self.labeled:
            labels = records[:, -1]
            if not np.all((labels == 0.0) | (labels == 1.0)):
                raise InvalidInputError("labels must be 0 or 1")
        records.setflags(write=False)
        object.__setattr__(self, "records", records)

    @property
    def m(self) -> int:
        return int(self.records.shape[0])

    @property
    def sample_dim(self) -> int:
        return int(self.records.shape[1])

    @property
    def feature_dim(self) -> int:
        return self.sample_dim - 1 if self.labeled else self.sample_dim

    @property
    def features(self) -> np.ndarray:
        return self.records[:, :-1] if self.labeled else self.records

    @property
    def labels(self) -> np.ndarray:
        if not self.labeled:
            raise InvalidInputError("database has no labels")
        return self.records[:, -1]

    def positive_fraction(self) -> float:
        return float(np.mean(self.labels))


def load_database_csv(path: Union[str, Path], labeled: bool = True) -> FiniteDatabase:
    """
    Load a database from CSV: header row, one record per line, numeric columns.

    Args:
        path: CSV file path
        labeled: Whether the final column is the 0/1 label

    Raises:
        StorageError: If the file cannot be read or parsed
    """
    try:
        records = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as e:
        raise StorageError(f"could not load database ({e})", str(path))
    logger.info(f"Loaded {records.shape[0]} records with {records.shape[1]} columns from {path}")
    return FiniteDatabase(records, labeled=labeled)


def make_credit_like_dataset(
    m: int,
    d: int,
    rng: np.random.Generator,
    positive_fraction: float = 0.06624,
    separation: float = 1.0,
) -> FiniteDatabase:
    """
    Synthetic strategic-classification data with Gaussian class-conditional features.

    Exactly round(m * positive_fraction) records are positive (label 1). Features are
    N(+/- separation/2 * u, I) with a fixed unit direction u, then standardised.
    """
    if m < 2 or d < 1:
        raise InvalidInputError("need m >= 2 and d >= 1")
    if not 0.0 < positive_fraction < 1.0:
        raise InvalidInputError("positive_fraction must lie in (0, 1)")

    n_pos = max(1, int(round(m * positive_fraction)))
    labels = np.zeros(m)
    labels[rng.permutation(m)[:n_pos]] = 1.0

    direction = np.ones(d) / np.sqrt(d)
    centers = np.where(labels[:, None] == 1.0, 0.5, -0.5) * separation * direction
    features = centers + rng.standard_normal((m, d))
    features = (features - features.mean(axis=0)) / features.std(axis=0)

    return FiniteDatabase(np.column_stack([features, labels]), labeled=True)


def make_bernoulli_database(m: int, p: float, b: float, rng: np.random.Generator) -> FiniteDatabase:
    """Database {b * z_i} with z_i ~ Bernoulli(p), the finite form of the quadratic experiment."""
    if m < 1:
        raise InvalidInputError("database needs m >= 1")
    draws = (rng.random(m) < p).astype(np.float64)
    return FiniteDatabase(b * draws[:, None])


def train_test_split(
    db: FiniteDatabase, train_fraction: float, rng: np.random.Generator
) -> Tuple[FiniteDatabase, FiniteDatabase]:
    """Random split into train and test databases (both non-empty)."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidInputError("train_fraction must lie in (0, 1)")
    order = rng.permutation(db.m)
    n_train = min(max(1, int(round(train_fraction * db.m))), db.m - 1)
    return (
        FiniteDatabase(db.records[order[:n_train]], db.labeled),
        FiniteDatabase(db.records[order[n_train:]], db.labeled),
    )
