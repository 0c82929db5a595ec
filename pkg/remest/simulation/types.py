"""Simulation records and estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from remest.models.channel import ChannelSymbol, Reception


@dataclass
class TrajectoryRecord:
    """One closed-loop episode, steps t = 0..T.

    Attributes:
        x: Source values X_t.
        s: Channel states S_t.
        u: Transmission decisions U_t.
        y: Channel outputs Y_t.
        h: Reception flags H_t.
        z: Receiver reconstruction driver Z_t.
        xhat: Estimates Xhat_t.
        cost: Per-step cost lambda*U_t + d(X_t - Xhat_t).
        s_initial: S_{-1}.
        a: Source gain used for the Z recursion.
    """

    x: list[float] = field(default_factory=list)
    s: list[int] = field(default_factory=list)
    u: list[int] = field(default_factory=list)
    y: list[ChannelSymbol] = field(default_factory=list)
    h: list[Reception] = field(default_factory=list)
    z: list[float] = field(default_factory=list)
    xhat: list[float] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    s_initial: int = 0
    a: float = 1.0

    @property
    def total_cost(self) -> float:
        total = 0.0
        for c in self.cost:
            total += c
        return total

    @property
    def error(self) -> np.ndarray:
        """E_t = X_t - a Z_{t-1}."""
        z_prev = np.concatenate([[0.0], np.asarray(self.z[:-1])])
        return np.asarray(self.x) - self.a * z_prev

    @property
    def post_error(self) -> np.ndarray:
        """E+_t = X_t - Z_t."""
        return np.asarray(self.x) - np.asarray(self.z)

    @property
    def estimate_error(self) -> np.ndarray:
        """Ehat_t = Xhat_t - Z_t."""
        return np.asarray(self.xhat) - np.asarray(self.z)

    def rows(self):
        """CSV rows (t, x, s, u, y_tag, y_value, xhat, cost)."""
        for t, symbol in enumerate(self.y):
            value = "" if symbol.value is None else symbol.value
            yield (
                t, self.x[t], self.s[t], self.u[t],
                symbol.tag.value, value, self.xhat[t], self.cost[t],
            )


@dataclass
class CostEstimate:
    """Monte Carlo estimate of the expected total cost.

    Attributes:
        mean: transmission + distortion.
        std_error: Standard error of the per-episode total.
        n_reps: Number of episodes.
        transmission: Mean transmission cost (lambda * transmissions).
        distortion: Mean total distortion.
        transmissions: Mean number of transmission attempts per episode.
    """

    mean: float
    std_error: float
    n_reps: int
    transmission: float
    distortion: float
    transmissions: float

    def within(self, reference: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - reference) <= n_se * self.std_error

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_reps": self.n_reps,
            "transmission": self.transmission,
            "distortion": self.distortion,
            "transmissions": self.transmissions,
        }

    @classmethod
    def from_samples(
        cls, totals: np.ndarray, transmissions: np.ndarray, distortions: np.ndarray, lam: float
    ) -> CostEstimate:
        """Aggregate per-episode samples in replication-index order."""
        n = int(totals.size)
        mean_total = math.fsum(totals) / n
        variance = math.fsum(np.square(totals - mean_total)) / (n - 1)
        mean_count = math.fsum(transmissions) / n
        transmission = lam * mean_count
        distortion = math.fsum(distortions) / n
        return cls(
            mean=transmission + distortion,
            std_error=math.sqrt(variance / n),
            n_reps=n,
            transmission=transmission,
            distortion=distortion,
            transmissions=mean_count,
        )


@dataclass
class PerturbationEntry:
    """Paired cost difference (perturbed - base) for one perturbation.

    Attributes:
        t: Time index, or None for a joint shift of every threshold.
        s: Channel state, or None for a joint shift.
        delta: Threshold shift.
        mean_difference: Mean of perturbed - base over replications.
        paired_std_error: Standard error of that mean.
    """

    t: int | None
    s: int | None
    delta: float
    mean_difference: float
    paired_std_error: float

    def improves(self, n_se: float = 3.0) -> bool:
        return self.mean_difference < -n_se * self.paired_std_error

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "s": self.s,
            "delta": self.delta,
            "mean_difference": self.mean_difference,
            "paired_std_error": self.paired_std_error,
        }


@dataclass
class PerturbationReport:
    """All perturbations of a base policy, with common random numbers."""

    base: CostEstimate
    entries: list[PerturbationEntry] = field(default_factory=list)

    def improvements(self, n_se: float = 3.0) -> list[PerturbationEntry]:
        return [entry for entry in self.entries if entry.improves(n_se)]

    @property
    def passed(self) -> bool:
        return not self.improvements()

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "passed": self.passed,
            "entries": [entry.to_dict() for entry in self.entries],
        }
