"""
Per-trial random streams.

Each trial owns a Philox generator keyed by (seed, trial index). Draws are
taken in fixed-size blocks, one block of uniforms followed (when noise is
enabled) by one block of standard normals, so the numbers a trial sees never
depend on which other trials share its chunk or on the worker count.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidInputError

logger = logging.getLogger("perfclip.algorithms.streams")

StepDraws = Tuple[np.ndarray, Optional[np.ndarray]]


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial of an experiment."""
    if seed < 0 or trial < 0:
        raise InvalidInputError("seed and trial index must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


class GeneratorStream:
    """Unbuffered adapter drawing directly from one numpy Generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def draws(self, shape: Tuple[int, ...], noise: bool) -> StepDraws:
        u = self.rng.random(shape[:-1])
        zeta = self.rng.standard_normal(shape) if noise else None
        return u, zeta


class TrialStreams:
    """
    Buffered streams for a batch of trials stepping in lockstep.

    Args:
        seed: Experiment seed
        trials: Global trial indices, one per batch row
        block: Number of steps buffered per refill
        noise_dim: Model dimension when Gaussian noise is drawn, else 0
    """

    def __init__(self, seed: int, trials: Sequence[int], block: int = 1024, noise_dim: int = 0):
        if block < 1:
            raise InvalidInputError(f"stream block must be >= 1, got {block}")
        self.seed = int(seed)
        self.trials = [int(i) for i in trials]
        self.block = int(block)
        self.noise_dim = int(noise_dim)
        self._gens = [trial_generator(self.seed, i) for i in self.trials]
        self._u = np.empty((len(self._gens), self.block))
        self._z = np.empty((len(self._gens), self.block, self.noise_dim))
        self._pos = self.block

    def __len__(self) -> int:
        return len(self._gens)

    def _refill(self) -> None:
        for row, gen in enumerate(self._gens):
            self._u[row] = gen.random(self.block)
            if self.noise_dim:
                self._z[row] = gen.standard_normal((self.block, self.noise_dim))
        self._pos = 0

    def draws(self, shape: Tuple[int, ...], noise: bool) -> StepDraws:
        if shape[:-1] != (len(self._gens),):
            raise InvalidInputError(f"stream serves {len(self._gens)} trials, iterate batch has shape {shape}")
        if noise and self.noise_dim != shape[-1]:
            raise InvalidInputError("stream was built without noise of the model dimension")
        if self._pos == self.block:
            self._refill()
        u = self._u[:, self._pos]
        zeta = self._z[:, self._pos, :] if noise else None
        self._pos += 1
        return u, zeta


def as_stream(rng):
    """Accept a numpy Generator or an object with a draws(shape, noise) method."""
    if isinstance(rng, np.random.Generator):
        return GeneratorStream(rng)
    if hasattr(rng, "draws"):
        return rng
    raise InvalidInputError(f"expected a numpy Generator or a trial stream, got {type(rng).__name__}")
