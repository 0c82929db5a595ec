"""Belief containers and prescriptions.

FinitePMF carries pi^1 / pi^2 for finite sources; GridDensity carries the
conditional density of the error process on a symmetric uniform grid.
Both are immutable; filters return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from remest.errors import (
    DegenerateConditioningError,
    DimensionMismatchError,
    ModelValidationError,
    TruncationOverflowError,
)
from remest.models.noise import NoiseSpec

# Rounding used for belief deduplication keys.
KEY_DIGITS = 12

# Probability sums must be 1 within this tolerance.
PMF_TOL = 1e-12

# Grid densities are renormalized only when their mass is within this of 1.
MASS_OVERFLOW_TOL = 1e-6

# Grid conditioning sets lighter than this are treated as null events.
CONDITIONING_MASS_TOL = 1e-12


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


# ------------------------------------------------------------------
# Finite alphabet
# ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FinitePMF:
    """Probability mass function over {0, ..., n-1}.

    Attributes:
        probs: Nonnegative entries summing to 1 within 1e-12.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = _frozen_array(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ModelValidationError(f"pmf must be a nonempty vector, got shape {probs.shape}")
        if np.any(probs < 0):
            raise ModelValidationError(f"pmf has negative entries: {probs.tolist()}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PMF_TOL:
            raise ModelValidationError(f"pmf sums to {total:.15g}, expected 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def one_hot(cls, n: int, x: int) -> FinitePMF:
        probs = np.zeros(n)
        probs[x] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, n: int) -> FinitePMF:
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def key(self) -> tuple[float, ...]:
        """Deduplication key: entries rounded to 12 decimal digits."""
        # Adding 0.0 folds -0.0 into 0.0.
        return tuple(float(v) + 0.0 for v in np.round(self.probs, KEY_DIGITS))

    def mass(self, mask: np.ndarray) -> float:
        return float(self.probs[np.asarray(mask, dtype=bool)].sum())

    def restricted(self, mask: np.ndarray) -> FinitePMF:
        """Condition on the event ``mask``; raises only when the event has zero mass."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.probs.shape:
            raise DimensionMismatchError(
                f"mask has {mask.size} entries, pmf has {self.probs.size}"
            )
        kept = np.where(mask, self.probs, 0.0)
        total = kept.sum()
        if total <= 0.0:
            raise DegenerateConditioningError(
                f"conditioning on an event of probability {total:.3g}"
            )
        return FinitePMF(kept / total)

    def allclose(self, other: FinitePMF, atol: float = 1e-12) -> bool:
        return self.n == other.n and bool(np.allclose(self.probs, other.probs, rtol=0, atol=atol))


# ------------------------------------------------------------------
# Error process on a grid
# ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density samples on the symmetric grid ``h * (-m..m)`` spanning [-L, L].

    ``values[i]`` is the average density over cell ``[x_i - h/2, x_i + h/2]``,
    so ``h * values`` are cell masses.

    Attributes:
        half_width: L.
        values: Nonnegative samples; odd length, so 0 is a grid point.
    """

    half_width: float
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size < 3 or values.size % 2 == 0:
            raise ModelValidationError(
                f"grid needs an odd number (>= 3) of points, got {values.size}"
            )
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ModelValidationError(f"half_width must be positive, got {self.half_width}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ModelValidationError("density values must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    # --- Constructors ---

    @classmethod
    def from_cell_masses(cls, half_width: float, masses: np.ndarray) -> GridDensity:
        masses = np.asarray(masses, dtype=np.float64)
        h = 2.0 * half_width / (masses.size - 1)
        return cls(half_width, masses / h)

    @classmethod
    def dirac(cls, half_width: float, n_points: int) -> GridDensity:
        """Grid Dirac at 0: mass 1/h in the center cell."""
        masses = np.zeros(n_points)
        masses[n_points // 2] = 1.0
        return cls.from_cell_masses(half_width, masses)

    @classmethod
    def from_noise(cls, noise: NoiseSpec, half_width: float, n_points: int) -> GridDensity:
        """Cell-averaged samples of a noise density (unnormalized if it overflows the grid)."""
        m = n_points // 2
        h = 2.0 * half_width / (n_points - 1)
        kernel = noise.cell_masses(h)
        k = kernel.size // 2
        masses = np.zeros(n_points)
        reach = min(k, m)
        masses[m - reach : m + reach + 1] = kernel[k - reach : k + reach + 1]
        return cls.from_cell_masses(half_width, masses)

    @classmethod
    def uniform(cls, half_width: float, n_points: int, width: float) -> GridDensity:
        """Cell-averaged uniform density on [-width, width]."""
        grid = cls.dirac(half_width, n_points)
        x, h = grid.points, grid.cell_width
        overlap = np.minimum(x + 0.5 * h, width) - np.maximum(x - 0.5 * h, -width)
        return cls.from_cell_masses(half_width, np.clip(overlap, 0.0, None) / (2.0 * width))

    # --- Geometry ---

    @property
    def n_points(self) -> int:
        return int(self.values.size)

    @property
    def center_index(self) -> int:
        return self.n_points // 2

    @property
    def cell_width(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        m = self.center_index
        return self.cell_width * np.arange(-m, m + 1, dtype=np.float64)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.values * self.cell_width

    @property
    def mass(self) -> float:
        return math.fsum(self.cell_masses)

    def same_grid(self, other: GridDensity) -> bool:
        return self.n_points == other.n_points and self.half_width == other.half_width

    def with_cell_masses(self, masses: np.ndarray) -> GridDensity:
        return GridDensity.from_cell_masses(self.half_width, masses)

    def normalized(self, tol: float = MASS_OVERFLOW_TOL) -> GridDensity:
        """Rescale to unit mass; mass further than ``tol`` from 1 is an overflow."""
        total = self.mass
        if abs(total - 1.0) > tol:
            raise TruncationOverflowError(
                f"grid mass {total:.9g} deviates from 1 by more than {tol:g}; "
                "widen the grid (half_width) for these dynamics"
            )
        return GridDensity(self.half_width, self.values / total)


# ------------------------------------------------------------------
# Prescriptions
# ------------------------------------------------------------------


@dataclass(frozen=True)
class Prescription:
    """Map from source value (or grid point) to transmit (1) / stay silent (0).

    Attributes:
        decide: One bit per alphabet element or grid point.
    """

    decide: tuple[int, ...]

    def __post_init__(self) -> None:
        decide = tuple(int(v) for v in self.decide)
        if any(v not in (0, 1) for v in decide):
            raise ModelValidationError(f"prescription entries must be 0 or 1: {decide}")
        object.__setattr__(self, "decide", decide)

    @classmethod
    def constant(cls, n: int, bit: int) -> Prescription:
        return cls((bit,) * n)

    def __call__(self, x: int) -> int:
        return self.decide[x]

    def __len__(self) -> int:
        return len(self.decide)

    @property
    def transmit_mask(self) -> np.ndarray:
        """Indicator of B_1(phi)."""
        return np.asarray(self.decide, dtype=bool)

    @property
    def silent_mask(self) -> np.ndarray:
        """Indicator of B_0(phi)."""
        return ~self.transmit_mask


@dataclass(frozen=True)
class ThresholdPrescription:
    """Prescription in the family F(c): transmit iff |e - c| >= k.

    Attributes:
        center: c.
        threshold: k >= 0; ``math.inf`` never transmits.
    """

    center: float = 0.0
    threshold: float = math.inf

    def __post_init__(self) -> None:
        if not self.threshold >= 0:
            raise ModelValidationError(f"threshold must be >= 0, got {self.threshold}")

    def decide(self, e: np.ndarray | float) -> np.ndarray:
        return (np.abs(np.asarray(e) - self.center) >= self.threshold).astype(np.int8)
