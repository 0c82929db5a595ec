"""Brute-force ground truth for tiny finite instances."""

from remest.oracle.profiles import (
    BLANK0,
    BLANK1,
    Granularity,
    StrategyProfile,
    TinyInstance,
    reachable_histories,
)
from remest.oracle.search import (
    OracleResult,
    SearchSize,
    exact_cost,
    exhaustive_search,
    profile_from_solution,
    search_size,
)

__all__ = [
    "BLANK0",
    "BLANK1",
    "Granularity",
    "OracleResult",
    "SearchSize",
    "StrategyProfile",
    "TinyInstance",
    "exact_cost",
    "exhaustive_search",
    "profile_from_solution",
    "reachable_histories",
    "search_size",
]
