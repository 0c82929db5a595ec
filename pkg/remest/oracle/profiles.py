"""Tiny instances, information sets, and strategy profiles for brute force.

Histories are encoded with integers. The common history before step t is
``(s_{-1}, y_0, ..., y_{t-1})`` with channel symbols coded as ``BLANK0 = -1``,
``BLANK1 = -2`` and payload ``x >= 0``; S_t is recoverable from y_t, so the
common history carries the channel states too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from remest.errors import GuardError, ModelValidationError
from remest.models.channel import OFF, ON
from remest.models.problem import FiniteProblem

BLANK0 = -1
BLANK1 = -2

DEFAULT_MAX_STATES = 2
DEFAULT_MAX_HORIZON = 2
DEFAULT_MAX_PROFILES = 100_000_000

Common = tuple[int, ...]


class Granularity(str, Enum):  # noqa: UP042
    """Transmitter information-set granularity."""

    FULL = "full"  # (t, x_{0:t}, u_{0:t-1}, common)
    RESTRICTED = "restricted"  # (t, x_t, common)


def symbol_code(u: int, s: int, x: int) -> int:
    """Channel output code for decision ``u`` in state ``s`` with source value ``x``."""
    if s == OFF:
        return BLANK0
    return x if u else BLANK1


def state_of(code: int) -> int:
    return OFF if code == BLANK0 else ON


def last_channel_state(common: Common) -> int:
    """S_{t-1} given the common history before step t."""
    return common[0] if len(common) == 1 else state_of(common[-1])


def transmitter_key(
    granularity: Granularity,
    t: int,
    xs: tuple[int, ...],
    us: tuple[int, ...],
    common: Common,
) -> tuple:
    if granularity is Granularity.RESTRICTED:
        return (t, xs[-1], common)
    return (t, xs, us, common)


def receiver_key(t: int, common_next: Common) -> tuple:
    return (t, common_next)


@dataclass
class TinyInstance:
    """A finite instance small enough for exhaustive enumeration.

    Attributes:
        problem: Source, channel, distortion table and lambda.
        horizon: T.
        initial_channel: Distribution of S_{-1}; defaults to the channel's.
        max_states: Alphabet guard.
        max_horizon: Horizon guard.
        max_profiles: Guard on the number of profiles enumerated by a search.
    """

    problem: FiniteProblem
    horizon: int
    initial_channel: np.ndarray | None = None
    max_states: int = DEFAULT_MAX_STATES
    max_horizon: int = DEFAULT_MAX_HORIZON
    max_profiles: int = DEFAULT_MAX_PROFILES

    def __post_init__(self) -> None:
        if self.horizon < 0:
            raise ModelValidationError(f"horizon must be nonnegative, got {self.horizon}")
        if self.n > self.max_states:
            raise GuardError(
                f"oracle instance has {self.n} source states; at most {self.max_states} allowed"
            )
        if self.horizon > self.max_horizon:
            raise GuardError(
                f"oracle horizon T={self.horizon} exceeds the guard T <= {self.max_horizon}"
            )
        if self.initial_channel is None:
            self.initial_channel = self.problem.channel.initial
        self.initial_channel = np.asarray(self.initial_channel, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.problem.source.n_states

    @property
    def lam(self) -> float:
        return self.problem.lam

    @property
    def P(self) -> np.ndarray:
        return self.problem.source.matrix

    @property
    def Q(self) -> np.ndarray:
        return self.problem.channel.matrix

    @property
    def D(self) -> np.ndarray:
        return self.problem.distortion.array

    @property
    def source_initial(self) -> np.ndarray:
        return np.asarray(self.problem.source.initial, dtype=np.float64)


@dataclass
class StrategyProfile:
    """Transmitter and receiver maps over information sets.

    Attributes:
        granularity: Key format of ``transmitter``.
        transmitter: Information set -> U_t in {0, 1}.
        receiver: (t, common history through y_t) -> estimate.
    """

    granularity: Granularity
    transmitter: dict[tuple, int] = field(default_factory=dict)
    receiver: dict[tuple, int] = field(default_factory=dict)

    def transmit(self, t: int, xs: tuple[int, ...], us: tuple[int, ...], common: Common) -> int:
        key = transmitter_key(self.granularity, t, xs, us, common)
        try:
            return self.transmitter[key]
        except KeyError:
            raise ModelValidationError(f"profile has no transmitter decision at {key}") from None

    def estimate(self, t: int, common_next: Common) -> int:
        key = receiver_key(t, common_next)
        try:
            return self.receiver[key]
        except KeyError:
            raise ModelValidationError(f"profile has no receiver decision at {key}") from None

    @classmethod
    def constant(
        cls, instance: TinyInstance, u: int, xhat: int, granularity: Granularity
    ) -> StrategyProfile:
        """Same decision at every information set reachable under ``u``."""
        profile = cls(granularity)
        for t, xs, us, common, _ in reachable_histories(instance, lambda *_: u):
            profile.transmitter[transmitter_key(granularity, t, xs, us, common)] = u
            s_prev = last_channel_state(common)
            for s in (OFF, ON):
                if instance.Q[s_prev, s] > 0:
                    code = symbol_code(u, s, xs[-1])
                    profile.receiver[receiver_key(t, common + (code,))] = xhat
        return profile

    def to_dict(self) -> dict:
        """Sorted, JSON-ready listing of every decision."""
        return {
            "granularity": self.granularity.value,
            "transmitter": [
                {"key": _jsonable(key), "u": u} for key, u in sorted(self.transmitter.items())
            ],
            "receiver": [
                {"key": _jsonable(key), "xhat": xhat} for key, xhat in sorted(self.receiver.items())
            ],
        }


def _jsonable(key):
    if isinstance(key, tuple):
        return [_jsonable(part) for part in key]
    return key


def reachable_histories(instance: TinyInstance, decide):
    """Yield (t, xs, us, common, prob) for every positive-probability pre-transmission history.

    ``decide(t, xs, us, common)`` gives U_t along the way.
    """
    P, Q = instance.P, instance.Q
    stack = []
    for s0 in (ON, OFF):
        for x0 in range(instance.n - 1, -1, -1):
            prob = instance.initial_channel[s0] * instance.source_initial[x0]
            if prob > 0:
                stack.append((0, (x0,), (), (s0,), prob))
    while stack:
        t, xs, us, common, prob = stack.pop()
        yield t, xs, us, common, prob
        if t == instance.horizon:
            continue
        u = decide(t, xs, us, common)
        s_prev = last_channel_state(common)
        for s in (ON, OFF):
            if Q[s_prev, s] == 0:
                continue
            code = symbol_code(u, s, xs[-1])
            for x_next in range(instance.n - 1, -1, -1):
                p = P[xs[-1], x_next]
                if p > 0:
                    weight = prob * Q[s_prev, s] * p
                    stack.append((t + 1, xs + (x_next,), us + (u,), common + (code,), weight))
