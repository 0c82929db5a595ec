"""Symmetric unimodal noise families for the AR(1) source.

Densities, CDFs and survival functions come from ``scipy.stats``; sampling
goes through the caller's ``numpy.random.Generator`` so models own no
randomness. Grid work uses ``truncation_radius``: 8 scale units for the
Gaussian (tail mass below 1.3e-15), 32 for the Laplace (below 1.3e-14) and
the exact support for the compact families.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats


class NoiseFamily(str, Enum):  # noqa: UP042
    """Supported noise density families."""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"
    TRIANGULAR = "triangular"


_TRUNCATION_UNITS = {
    NoiseFamily.GAUSSIAN: 8.0,
    NoiseFamily.LAPLACE: 32.0,
    NoiseFamily.UNIFORM: 1.0,
    NoiseFamily.TRIANGULAR: 1.0,
}

_STD_PER_SCALE = {
    NoiseFamily.GAUSSIAN: 1.0,
    NoiseFamily.LAPLACE: math.sqrt(2.0),
    NoiseFamily.UNIFORM: 1.0 / math.sqrt(3.0),
    NoiseFamily.TRIANGULAR: 1.0 / math.sqrt(6.0),
}


class NoiseSpec(BaseModel):
    """Zero-mean symmetric unimodal noise W_t.

    Attributes:
        family: Density family.
        scale: Standard deviation (gaussian), diversity b (laplace), or
            half-width of the support (uniform, triangular).
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    family: NoiseFamily = NoiseFamily.GAUSSIAN
    scale: float = Field(1.0, gt=0)

    @field_validator("scale")
    @classmethod
    def _finite_scale(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"noise scale must be finite, got {value}")
        return value

    # ------------------------------------------------------------------
    # Closed forms
    # ------------------------------------------------------------------

    @property
    def distribution(self):
        """Frozen ``scipy.stats`` distribution for this family."""
        c = self.scale
        if self.family is NoiseFamily.GAUSSIAN:
            return stats.norm(loc=0.0, scale=c)
        if self.family is NoiseFamily.LAPLACE:
            return stats.laplace(loc=0.0, scale=c)
        if self.family is NoiseFamily.UNIFORM:
            return stats.uniform(loc=-c, scale=2.0 * c)
        return stats.triang(c=0.5, loc=-c, scale=2.0 * c)

    def pdf(self, w: np.ndarray | float) -> np.ndarray:
        return self.distribution.pdf(w)

    def cdf(self, w: np.ndarray | float) -> np.ndarray:
        return self.distribution.cdf(w)

    def sf(self, w: np.ndarray | float) -> np.ndarray:
        return self.distribution.sf(w)

    @property
    def std(self) -> float:
        return self.scale * _STD_PER_SCALE[self.family]

    @property
    def truncation_radius(self) -> float:
        """Half-width of the support used for grid work."""
        return self.scale * _TRUNCATION_UNITS[self.family]

    # ------------------------------------------------------------------
    # Sampling and discretization
    # ------------------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...] | None = None):
        """Draw noise realizations from the caller's generator."""
        c = self.scale
        if self.family is NoiseFamily.GAUSSIAN:
            return rng.normal(0.0, c, size)
        if self.family is NoiseFamily.LAPLACE:
            return rng.laplace(0.0, c, size)
        if self.family is NoiseFamily.UNIFORM:
            return rng.uniform(-c, c, size)
        return rng.triangular(-c, 0.0, c, size)

    def cell_masses(self, h: float, max_offset: int | None = None) -> np.ndarray:
        """Probability of each grid cell ``[k*h - h/2, k*h + h/2]``.

        Offsets run over ``k = -K..K`` with ``K = ceil(truncation_radius / h)``
        (capped at ``max_offset``). Masses are computed for ``k >= 0`` from the
        survival function and mirrored, so the kernel is exactly symmetric.

        Args:
            h: Cell width.
            max_offset: Optional cap on K.

        Returns:
            Array of length ``2K + 1`` centered on offset 0.
        """
        if h <= 0:
            raise ValueError(f"cell width must be positive, got {h}")
        n_half = math.ceil(self.truncation_radius / h)
        if max_offset is not None:
            n_half = min(n_half, max_offset)
        k = np.arange(n_half + 1, dtype=np.float64)
        upper = self.sf(k * h + 0.5 * h)
        lower = np.empty_like(upper)
        lower[0] = upper[0]
        lower[1:] = self.sf(k[1:] * h - 0.5 * h)
        half = lower - upper
        half[0] = 1.0 - 2.0 * upper[0]
        return np.concatenate([half[:0:-1], half])
