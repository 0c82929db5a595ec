"""Monte Carlo cost estimates and the threshold perturbation check."""

from __future__ import annotations

import logging
import math
import time

import numpy as np

from remest.errors import ModelValidationError
from remest.models.problem import AR1Problem
from remest.simulation.episodes import draw_batch, run_batch
from remest.simulation.types import CostEstimate, PerturbationEntry, PerturbationReport
from remest.solvers.threshold import ThresholdSchedule

logger = logging.getLogger(__name__)


def _check_reps(n_reps: int) -> None:
    if n_reps < 2:
        raise ModelValidationError(f"n_reps must be at least 2, got {n_reps}")


def monte_carlo_cost(
    problem: AR1Problem,
    policy: ThresholdSchedule,
    horizon: int,
    n_reps: int,
    seed: int,
    *,
    initial_channel: np.ndarray | list[float] | None = None,
    workers: int = 1,
) -> CostEstimate:
    """Estimate E[sum_t lambda U_t + d(X_t - Xhat_t)] over ``n_reps`` episodes.

    The result is bit-identical for a given seed whatever ``workers`` is.
    """
    _check_reps(n_reps)
    started = time.monotonic()
    draws = draw_batch(problem.source.noise, horizon, n_reps, seed, workers=workers)
    batch = run_batch(problem, policy, draws, initial_channel)
    estimate = CostEstimate.from_samples(
        batch.totals, batch.transmissions, batch.distortions, problem.lam
    )
    logger.info(
        "Monte Carlo: T=%d, n=%d, mean=%.6f +- %.6f (%.2fs)",
        horizon,
        n_reps,
        estimate.mean,
        estimate.std_error,
        time.monotonic() - started,
    )
    return estimate


def _paired_difference(perturbed: np.ndarray, base: np.ndarray) -> tuple[float, float]:
    diff = perturbed - base
    n = diff.size
    mean = math.fsum(diff) / n
    variance = math.fsum(np.square(diff - mean)) / (n - 1)
    return mean, math.sqrt(variance / n)


def perturbation_check(
    problem: AR1Problem,
    policy: ThresholdSchedule,
    deltas: list[float],
    horizon: int,
    n_reps: int,
    seed: int,
    *,
    initial_channel: np.ndarray | list[float] | None = None,
    workers: int = 1,
) -> PerturbationReport:
    """Shift thresholds one (t, s) cell at a time and jointly, with common random numbers.

    Every perturbed policy is evaluated on the same draws as the base policy,
    so differences are paired per replication.

    Args:
        problem: AR(1) instance.
        policy: Base thresholds.
        deltas: Finite shifts; shifted thresholds are clipped at 0.
        horizon: T.
        n_reps: Replications (at least 2).
        seed: Master seed.

    Returns:
        Base estimate and one entry per (t, s, delta) plus one joint entry per delta.
    """
    _check_reps(n_reps)
    if any(not math.isfinite(delta) for delta in deltas):
        raise ModelValidationError(f"perturbation deltas must be finite, got {deltas}")
    draws = draw_batch(problem.source.noise, horizon, n_reps, seed, workers=workers)
    base = run_batch(problem, policy, draws, initial_channel)
    report = PerturbationReport(
        base=CostEstimate.from_samples(
            base.totals, base.transmissions, base.distortions, problem.lam
        )
    )

    cells: list[tuple[int, int] | None] = [(t, s) for t in range(horizon + 1) for s in (0, 1)]
    cells.append(None)
    for delta in deltas:
        for cell in cells:
            shifted = policy.shifted(delta, None if cell is None else [cell])
            perturbed = run_batch(problem, shifted, draws, initial_channel)
            mean, se = _paired_difference(perturbed.totals, base.totals)
            t, s = (None, None) if cell is None else cell
            report.entries.append(PerturbationEntry(t, s, float(delta), mean, se))

    improving = report.improvements()
    if improving:
        logger.warning("%d perturbation(s) improve on the base policy", len(improving))
    else:
        logger.info("Perturbation check passed (%d entries)", len(report.entries))
    return report
