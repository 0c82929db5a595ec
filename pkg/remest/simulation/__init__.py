"""Closed-loop Monte Carlo simulation."""

from remest.simulation.episodes import (
    BatchResult,
    ReplicationDraws,
    draw_batch,
    draw_replication,
    replay_episode,
    replication_rng,
    run_batch,
    run_episode,
)
from remest.simulation.finite import simulate_finite, simulate_profile
from remest.simulation.monte_carlo import monte_carlo_cost, perturbation_check
from remest.simulation.types import (
    CostEstimate,
    PerturbationEntry,
    PerturbationReport,
    TrajectoryRecord,
)

__all__ = [
    "BatchResult",
    "CostEstimate",
    "PerturbationEntry",
    "PerturbationReport",
    "ReplicationDraws",
    "TrajectoryRecord",
    "draw_batch",
    "draw_replication",
    "monte_carlo_cost",
    "perturbation_check",
    "replay_episode",
    "replication_rng",
    "run_batch",
    "run_episode",
    "simulate_finite",
    "simulate_profile",
]
