"""Closed-loop simulation for finite-alphabet sources.

Replication ``r`` draws ``2T + 3`` uniforms from its substream: index 0
picks S_{-1}, index 1 picks X_0, index ``2 + 2t`` drives S_t and index
``3 + 2t`` drives X_{t+1}.
"""

from __future__ import annotations

import logging

import numpy as np

from remest.belief.filters import f1_finite, f2_finite
from remest.errors import BeliefKeyError, ModelValidationError
from remest.models.channel import (
    channel_output,
    channel_step,
    initial_channel_state,
)
from remest.models.distortion import step_cost
from remest.models.problem import FiniteProblem
from remest.models.source import invert_cdf
from remest.oracle.profiles import StrategyProfile, TinyInstance, symbol_code
from remest.simulation.episodes import replication_rng
from remest.simulation.types import CostEstimate
from remest.solvers.finite import FiniteDPSolution

logger = logging.getLogger(__name__)


def _finite_draws(seed: int, r: int, horizon: int) -> np.ndarray:
    return replication_rng(seed, r).random(2 * horizon + 3)


def _check_reps(n_reps: int) -> None:
    if n_reps < 2:
        raise ModelValidationError(f"n_reps must be at least 2, got {n_reps}")


def _finite_episode(
    problem: FiniteProblem,
    solution: FiniteDPSolution,
    draws: np.ndarray,
    initial_channel: np.ndarray,
    check_replay: bool,
) -> tuple[float, int, float]:
    source, channel, d = problem.source, problem.channel, problem.distortion
    horizon = solution.horizon
    s_prev = initial_channel_state(initial_channel, draws[0])
    pmf = solution.graph.nodes[solution.graph.initial[s_prev]].pmf
    x = invert_cdf(pmf.probs, draws[1])
    total = 0.0
    count = 0
    distortion = 0.0
    for t in range(horizon + 1):
        node = solution.pre_node(t, s_prev, pmf)
        if node is None or (check_replay and not node.pmf.allclose(pmf, atol=1e-9)):
            raise BeliefKeyError(f"replayed belief {pmf.key()} at t={t}, s={s_prev} not in graph")
        phi = solution.policy[node.key]
        u = phi(x)
        s = channel_step(channel, s_prev, draws[2 + 2 * t])
        y = channel_output(x if u else None, s)
        post = f2_finite(pmf, phi, y)
        post_node = solution.post_node(t, s, post)
        if post_node is None:
            raise BeliefKeyError(f"replayed belief {post.key()} at t={t}, s={s} not in graph")
        xhat = solution.estimates[post_node.key]
        total += step_cost(problem.lam, u, d, x, xhat)
        count += u
        distortion += d(x, xhat)
        if t < horizon:
            pmf = f1_finite(post, source)
            x = source.next_state(x, draws[3 + 2 * t])
        s_prev = s
    return total, count, distortion


def simulate_finite(
    problem: FiniteProblem,
    solution: FiniteDPSolution,
    horizon: int,
    n_reps: int,
    seed: int,
    *,
    check_replay: bool = True,
) -> CostEstimate:
    """Run the DP policy in closed loop, tracking beliefs with the filters online.

    Prescriptions and estimates are looked up by the deduplicated key of the
    replayed belief; S_{-1} follows the solution's initial channel law.

    Raises:
        BeliefKeyError: A replayed belief is missing from the solution graph
            or differs from the belief stored at the traversed node.
    """
    _check_reps(n_reps)
    if horizon != solution.horizon:
        raise ModelValidationError(
            f"solution covers T={solution.horizon}, simulation asked for T={horizon}"
        )
    totals = np.empty(n_reps)
    counts = np.empty(n_reps)
    distortions = np.empty(n_reps)
    for r in range(n_reps):
        draws = _finite_draws(seed, r, horizon)
        totals[r], counts[r], distortions[r] = _finite_episode(
            problem, solution, draws, solution.initial_channel, check_replay
        )
    estimate = CostEstimate.from_samples(totals, counts, distortions, problem.lam)
    logger.info(
        "Finite closed loop: T=%d, n=%d, mean=%.6f +- %.6f (DP value %.6f)",
        horizon,
        n_reps,
        estimate.mean,
        estimate.std_error,
        solution.optimal_cost,
    )
    return estimate


def simulate_profile(
    instance: TinyInstance, profile: StrategyProfile, n_reps: int, seed: int
) -> CostEstimate:
    """Monte Carlo cost of an oracle strategy profile."""
    _check_reps(n_reps)
    problem = instance.problem
    source, channel, D = problem.source, problem.channel, instance.D
    horizon = instance.horizon
    totals = np.empty(n_reps)
    counts = np.empty(n_reps)
    distortions = np.empty(n_reps)
    for r in range(n_reps):
        draws = _finite_draws(seed, r, horizon)
        s_prev = initial_channel_state(instance.initial_channel, draws[0])
        x = source.initial_state(draws[1])
        xs: tuple[int, ...] = (x,)
        us: tuple[int, ...] = ()
        common: tuple[int, ...] = (s_prev,)
        total = 0.0
        count = 0
        distortion = 0.0
        for t in range(horizon + 1):
            u = profile.transmit(t, xs, us, common)
            s = channel_step(channel, s_prev, draws[2 + 2 * t])
            common = common + (symbol_code(u, s, x),)
            xhat = profile.estimate(t, common)
            total += problem.lam * u + D[x, xhat]
            count += u
            distortion += D[x, xhat]
            if t < horizon:
                x = source.next_state(x, draws[3 + 2 * t])
                xs = xs + (x,)
                us = us + (u,)
            s_prev = s
        totals[r], counts[r], distortions[r] = total, count, distortion
    return CostEstimate.from_samples(totals, counts, distortions, problem.lam)
