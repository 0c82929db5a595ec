"""Remest exception hierarchy.

All remest-specific exceptions inherit from RemestError. Catch specific
subclasses in business logic; only catch RemestError at the CLI boundary,
which maps each family to an exit code.
"""


class RemestError(Exception):
    """Base exception for all remest errors."""


class ModelValidationError(RemestError):
    """Source, channel, distortion, or belief object violates its invariants."""


class DimensionMismatchError(ModelValidationError):
    """Belief and model dimensions disagree."""


class GridMismatchError(ModelValidationError):
    """Two grid densities live on different grids."""


class ConfigError(RemestError):
    """Experiment config missing, malformed, or inconsistent with the command."""


class DegenerateConditioningError(RemestError):
    """Conditioning on an observation that has zero probability under the prescription."""


class TruncationOverflowError(RemestError):
    """Probability mass escaped the grid beyond the declared tolerance."""


class GuardError(RemestError):
    """Instance exceeds a size guard (states, horizon, profiles, grid support)."""


class NodeBudgetError(GuardError):
    """Reachable-belief enumeration exceeded its node budget."""


class MissingSuccessorError(RemestError):
    """A dynamic-programming backup found no value for a successor node."""


class BeliefKeyError(RemestError):
    """Closed-loop belief replay reached a belief absent from the DP solution."""


class StructureViolationError(RemestError):
    """Branch difference J0 - J1 changes sign more than once on e >= 0."""
