"""Dynamic-programming solvers: reachable-belief DP and the threshold DP."""

from remest.solvers.finite import (
    BeliefGraph,
    BeliefNode,
    FiniteDPSolution,
    Stage,
    backup_post,
    backup_pre,
    enumerate_reachable,
    solve_finite,
)
from remest.solvers.structure import StructureReport, check_structure, m0, m1_tail
from remest.solvers.threshold import (
    ConvergenceReport,
    SolverGrid,
    ThresholdSchedule,
    ValueGrid,
    backward_induction,
    convergence_check,
    extract_thresholds,
)

__all__ = [
    "BeliefGraph",
    "BeliefNode",
    "ConvergenceReport",
    "FiniteDPSolution",
    "SolverGrid",
    "Stage",
    "StructureReport",
    "ThresholdSchedule",
    "ValueGrid",
    "backup_post",
    "backup_pre",
    "backward_induction",
    "check_structure",
    "convergence_check",
    "enumerate_reachable",
    "extract_thresholds",
    "m0",
    "m1_tail",
    "solve_finite",
]
