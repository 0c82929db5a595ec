"""Closed-loop episodes of a threshold transmitter and the Kalman-like receiver.

Randomness per replication comes from a counter-based substream of the
master seed: replication ``r`` uses ``SeedSequence(seed, spawn_key=(r,))``,
the same stream ``SeedSequence(seed).spawn()`` hands out as its r-th child.
Each replication draws, in this order, ``T + 2`` channel uniforms (index 0
picks S_{-1}, index t + 1 drives S_t) and then ``T`` source noise values
(W_0..W_{T-1}). The scalar and vectorized paths consume identical draws.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from remest.errors import ModelValidationError
from remest.models.channel import (
    ON,
    channel_output,
    channel_step,
    initial_channel_state,
)
from remest.models.distortion import step_cost
from remest.models.noise import NoiseSpec
from remest.models.problem import AR1Problem
from remest.models.source import ar1_step
from remest.simulation.types import TrajectoryRecord
from remest.solvers.threshold import ThresholdSchedule

logger = logging.getLogger(__name__)


def replication_rng(seed: int, r: int) -> np.random.Generator:
    """Generator for replication ``r`` of master seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


@dataclass
class ReplicationDraws:
    """Pre-drawn randomness for a block of replications.

    Attributes:
        uniforms: Shape (n, T+2), channel uniforms.
        noise: Shape (n, T), source noise.
    """

    uniforms: np.ndarray
    noise: np.ndarray

    @property
    def n_reps(self) -> int:
        return self.uniforms.shape[0]

    @property
    def horizon(self) -> int:
        return self.uniforms.shape[1] - 2


def draw_replication(
    rng: np.random.Generator, noise: NoiseSpec, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    uniforms = rng.random(horizon + 2)
    w = np.asarray(noise.sample(rng, horizon), dtype=np.float64)
    return uniforms, w


def draw_batch(
    noise: NoiseSpec,
    horizon: int,
    n_reps: int,
    seed: int,
    *,
    workers: int = 1,
    chunk_size: int = 4096,
) -> ReplicationDraws:
    """Draws for replications 0..n_reps-1, assembled in index order.

    Chunks may be drawn on a thread pool; every replication owns its
    substream, so the result does not depend on ``workers``.
    """

    def _chunk(start: int) -> tuple[np.ndarray, np.ndarray]:
        stop = min(start + chunk_size, n_reps)
        uniforms = np.empty((stop - start, horizon + 2))
        w = np.empty((stop - start, horizon))
        for i, r in enumerate(range(start, stop)):
            uniforms[i], w[i] = draw_replication(replication_rng(seed, r), noise, horizon)
        return uniforms, w

    starts = list(range(0, n_reps, chunk_size))
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_chunk, starts))
    else:
        chunks = [_chunk(start) for start in starts]
    logger.debug("Drew %d replications (T=%d, %d chunks)", n_reps, horizon, len(chunks))
    return ReplicationDraws(
        uniforms=np.concatenate([c[0] for c in chunks]),
        noise=np.concatenate([c[1] for c in chunks]),
    )


def _check_horizon(policy: ThresholdSchedule, horizon: int) -> None:
    if policy.horizon < horizon:
        raise ModelValidationError(
            f"policy covers t <= {policy.horizon}, episode needs t <= {horizon}"
        )


def replay_episode(
    problem: AR1Problem,
    policy: ThresholdSchedule,
    uniforms: np.ndarray,
    w: np.ndarray,
    initial_channel: np.ndarray | list[float] | None = None,
) -> TrajectoryRecord:
    """Run one episode from explicit draws."""
    horizon = len(uniforms) - 2
    _check_horizon(policy, horizon)
    source, channel, d = problem.source, problem.channel, problem.distortion
    a = source.a
    dist = channel.initial if initial_channel is None else np.asarray(initial_channel)

    s_prev = initial_channel_state(dist, uniforms[0])
    record = TrajectoryRecord(s_initial=s_prev, a=a)
    x = 0.0
    xhat_prev = 0.0
    z_prev = 0.0
    for t in range(horizon + 1):
        transmit = policy.transmits(t, s_prev, x - a * xhat_prev)
        s = channel_step(channel, s_prev, uniforms[t + 1])
        y = channel_output(x if transmit else None, s)
        xhat = y.value if y.is_payload else a * xhat_prev
        z = y.value if y.is_payload else a * z_prev

        record.x.append(x)
        record.s.append(s)
        record.u.append(int(transmit))
        record.y.append(y)
        record.h.append(y.reception)
        record.z.append(z)
        record.xhat.append(xhat)
        record.cost.append(step_cost(problem.lam, int(transmit), d, x, xhat))

        if t < horizon:
            x = ar1_step(source, x, w[t])
        s_prev, xhat_prev, z_prev = s, xhat, z
    return record


def run_episode(
    problem: AR1Problem,
    policy: ThresholdSchedule,
    horizon: int,
    rng: np.random.Generator,
    initial_channel: np.ndarray | list[float] | None = None,
) -> TrajectoryRecord:
    """One closed-loop episode with draws taken from ``rng``.

    U_t = 1 iff |X_t - a Xhat_{t-1}| >= k_t(S_{t-1}); Xhat_t is the payload
    when received, else a Xhat_{t-1}. X_0 = 0 and Xhat_{-1} = 0.
    """
    uniforms, w = draw_replication(rng, problem.source.noise, horizon)
    return replay_episode(problem, policy, uniforms, w, initial_channel)


@dataclass
class BatchResult:
    """Per-replication totals from :func:`run_batch`.

    Attributes:
        totals: Total cost per replication, accumulated step by step.
        transmissions: Transmission attempts per replication.
        distortions: Total distortion per replication.
    """

    totals: np.ndarray
    transmissions: np.ndarray
    distortions: np.ndarray


def run_batch(
    problem: AR1Problem,
    policy: ThresholdSchedule,
    draws: ReplicationDraws,
    initial_channel: np.ndarray | list[float] | None = None,
) -> BatchResult:
    """Vectorized closed loop over every replication in ``draws``."""
    horizon = draws.horizon
    _check_horizon(policy, horizon)
    source, channel, d = problem.source, problem.channel, problem.distortion
    a = source.a
    lam = problem.lam
    dist = channel.initial if initial_channel is None else np.asarray(initial_channel)
    p_on = channel.matrix[:, ON]
    k = policy.k

    n = draws.n_reps
    s_prev = (draws.uniforms[:, 0] < dist[ON]).astype(np.int64)
    x = np.zeros(n)
    xhat = np.zeros(n)
    totals = np.zeros(n)
    transmissions = np.zeros(n)
    distortions = np.zeros(n)
    for t in range(horizon + 1):
        transmit = np.abs(x - a * xhat) >= k[t, s_prev]
        s = (draws.uniforms[:, t + 1] < p_on[s_prev]).astype(np.int64)
        xhat = np.where(transmit & (s == ON), x, a * xhat)
        u = transmit.astype(np.float64)
        distortion = np.asarray(d(x - xhat), dtype=np.float64)
        totals = totals + (lam * u + distortion)
        transmissions += u
        distortions += distortion
        if t < horizon:
            x = a * x + draws.noise[:, t]
        s_prev = s
    return BatchResult(totals=totals, transmissions=transmissions, distortions=distortions)
