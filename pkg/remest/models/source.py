"""Source processes: finite-alphabet Markov chains and scalar AR(1)."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from remest.models.channel import STOCHASTIC_TOL
from remest.models.noise import NoiseSpec


class FiniteMarkovSource(BaseModel):
    """Markov chain X_t on the alphabet {0, ..., n-1}.

    Attributes:
        transition: n x n row-stochastic matrix P.
        initial: Distribution of X_0.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    kind: Literal["finite"] = "finite"
    transition: list[list[float]]
    initial: list[float]

    @field_validator("transition")
    @classmethod
    def _row_stochastic(cls, p: list[list[float]]) -> list[list[float]]:
        n = len(p)
        if n == 0:
            raise ValueError("transition must have at least one state")
        for i, row in enumerate(p):
            if len(row) != n:
                raise ValueError(f"transition row {i} has {len(row)} entries, expected {n}")
            if any(v < 0 for v in row):
                raise ValueError(f"transition row {i} has negative entries: {row}")
            total = sum(row)
            if abs(total - 1.0) > STOCHASTIC_TOL:
                raise ValueError(f"transition row {i} sums to {total:.12g}, expected 1")
        return p

    @model_validator(mode="after")
    def _initial_matches(self) -> FiniteMarkovSource:
        if len(self.initial) != len(self.transition):
            raise ValueError(
                f"initial has {len(self.initial)} entries, expected {len(self.transition)}"
            )
        if any(v < 0 for v in self.initial):
            raise ValueError(f"initial has negative entries: {self.initial}")
        total = sum(self.initial)
        if abs(total - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"initial sums to {total:.12g}, expected 1")
        return self

    @property
    def n_states(self) -> int:
        return len(self.transition)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=np.float64)

    def next_state(self, x: int, draw: float) -> int:
        """Sample X_{t+1} given X_t = x by inverting the row CDF at ``draw``."""
        return invert_cdf(self.transition[x], draw)

    def initial_state(self, draw: float) -> int:
        return invert_cdf(self.initial, draw)


def invert_cdf(probs: Sequence[float], draw: float) -> int:
    """Smallest index whose cumulative probability exceeds ``draw``."""
    cumulative = 0.0
    for index, p in enumerate(probs):
        cumulative += p
        if draw < cumulative:
            return index
    # Rounding left the last partial sum just below 1.
    return max(i for i, p in enumerate(probs) if p > 0)


class AR1Source(BaseModel):
    """Scalar AR(1) source X_{t+1} = a X_t + W_t with X_0 = 0.

    Attributes:
        a: Gain; finite and nonzero.
        noise: Symmetric unimodal noise law of W_t.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    kind: Literal["ar1"] = "ar1"
    a: float
    noise: NoiseSpec = Field(default_factory=NoiseSpec)

    @field_validator("a")
    @classmethod
    def _nonzero_gain(cls, a: float) -> float:
        if not math.isfinite(a):
            raise ValueError(f"gain a must be finite, got {a}")
        if a == 0.0:
            raise ValueError("gain a = 0 is not supported (the estimator degenerates to 0)")
        return a


def ar1_step(source: AR1Source, x: float, w: float) -> float:
    """One AR(1) transition with noise realization ``w``."""
    return source.a * x + w
