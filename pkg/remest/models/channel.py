"""Gilbert-Elliott packet-drop channel with noiseless one-step feedback."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

OFF = 0
ON = 1

# Tolerance on row sums of stochastic matrices and probability vectors.
STOCHASTIC_TOL = 1e-12


class SymbolTag(str, Enum):  # noqa: UP042
    """Kinds of channel output."""

    PAYLOAD = "payload"
    BLANK0 = "blank0"
    BLANK1 = "blank1"


class Reception(str, Enum):  # noqa: UP042
    """Ternary reception flag H_t seen by the receiver."""

    BLANK0 = "blank0"
    BLANK1 = "blank1"
    RECEIVED = "received"


@dataclass(frozen=True)
class ChannelSymbol:
    """Channel output Y_t.

    Attributes:
        tag: payload, blank0 (channel OFF) or blank1 (ON, nothing sent).
        value: Transmitted source value; present only for payloads.
    """

    tag: SymbolTag
    value: float | int | None = None

    @classmethod
    def payload(cls, value: float | int) -> ChannelSymbol:
        return cls(SymbolTag.PAYLOAD, value)

    @classmethod
    def blank0(cls) -> ChannelSymbol:
        return cls(SymbolTag.BLANK0)

    @classmethod
    def blank1(cls) -> ChannelSymbol:
        return cls(SymbolTag.BLANK1)

    @property
    def is_payload(self) -> bool:
        return self.tag is SymbolTag.PAYLOAD

    @property
    def reception(self) -> Reception:
        if self.tag is SymbolTag.PAYLOAD:
            return Reception.RECEIVED
        if self.tag is SymbolTag.BLANK1:
            return Reception.BLANK1
        return Reception.BLANK0


def _check_probability_vector(values: list[float], name: str) -> None:
    if any(v < 0 for v in values):
        raise ValueError(f"{name} has negative entries: {values}")
    total = sum(values)
    if abs(total - 1.0) > STOCHASTIC_TOL:
        raise ValueError(f"{name} sums to {total:.12g}, expected 1")


class GilbertElliottChannel(BaseModel):
    """Two-state Markov channel, state 0 = OFF (drops), 1 = ON (delivers).

    Attributes:
        q: 2x2 row-stochastic transition matrix, ``q[r][s] = P(S_{t+1}=s | S_t=r)``.
        initial_state_dist: Distribution of S_{-1}. Defaults to the stationary
            distribution of ``q`` (uniform when the chain is reducible with
            two absorbing states).
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    q: list[list[float]]
    initial_state_dist: list[float] | None = None

    @field_validator("q")
    @classmethod
    def _row_stochastic(cls, q: list[list[float]]) -> list[list[float]]:
        if len(q) != 2 or any(len(row) != 2 for row in q):
            raise ValueError("q must be a 2x2 matrix")
        for i, row in enumerate(q):
            if any(v < 0 for v in row):
                raise ValueError(f"q row {i} has negative entries: {row}")
            total = sum(row)
            if abs(total - 1.0) > STOCHASTIC_TOL:
                raise ValueError(f"q row {i} sums to {total:.12g}, expected 1")
        return q

    @field_validator("initial_state_dist")
    @classmethod
    def _initial_distribution(cls, dist: list[float] | None) -> list[float] | None:
        if dist is None:
            return None
        if len(dist) != 2:
            raise ValueError("initial_state_dist must have length 2")
        _check_probability_vector(dist, "initial_state_dist")
        return dist

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.q, dtype=np.float64)

    def p_on(self, s: int) -> float:
        """Probability that the next state is ON given current state ``s``."""
        return self.q[s][ON]

    @property
    def stationary_distribution(self) -> np.ndarray:
        leave_off = self.q[OFF][ON]
        leave_on = self.q[ON][OFF]
        total = leave_off + leave_on
        if total == 0.0:
            return np.array([0.5, 0.5])
        return np.array([leave_on / total, leave_off / total])

    @property
    def initial(self) -> np.ndarray:
        """Distribution of S_{-1}."""
        if self.initial_state_dist is None:
            return self.stationary_distribution
        return np.asarray(self.initial_state_dist, dtype=np.float64)

    def with_initial(self, dist: list[float] | None) -> GilbertElliottChannel:
        """Copy of this channel with a different S_{-1} distribution."""
        if dist is None:
            return self
        return GilbertElliottChannel(q=self.q, initial_state_dist=list(dist))


def channel_output(value: float | int | None, state: int) -> ChannelSymbol:
    """Deterministic channel output for transmitted ``value`` (None = silent)."""
    if state not in (OFF, ON):
        raise ValueError(f"channel state must be 0 or 1, got {state}")
    if state == OFF:
        return ChannelSymbol.blank0()
    if value is None:
        return ChannelSymbol.blank1()
    return ChannelSymbol.payload(value)


def channel_step(channel: GilbertElliottChannel, s: int, draw: float) -> int:
    """Next channel state from current state ``s`` and a uniform draw in [0, 1)."""
    return ON if draw < channel.q[s][ON] else OFF


def initial_channel_state(dist: np.ndarray | list[float], draw: float) -> int:
    """Sample S_{-1} from ``dist`` with a uniform draw in [0, 1)."""
    return ON if draw < dist[ON] else OFF
