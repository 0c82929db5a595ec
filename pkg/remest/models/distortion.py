"""Distortion functions and the per-step cost lambda*u + d."""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class DistortionFn(BaseModel):
    """Even distortion d(e), nondecreasing on [0, inf) with d(0) = 0.

    Attributes:
        kind: ``squared`` (e^2), ``absolute`` (|e|) or ``even_power`` (|e|^power).
        power: Exponent for ``even_power``; ignored otherwise.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    kind: Literal["squared", "absolute", "even_power"] = "squared"
    power: float = Field(2.0, gt=0)

    def __call__(self, e: np.ndarray | float) -> np.ndarray | float:
        if self.kind == "squared":
            return np.square(e)
        if self.kind == "absolute":
            return np.abs(e)
        return np.power(np.abs(e), self.power)


class DistortionMatrix(BaseModel):
    """Tabulated distortion d(x, xhat) for finite alphabets.

    Attributes:
        matrix: n x n nonnegative table, row = true state, column = estimate.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    kind: Literal["matrix"] = "matrix"
    matrix: list[list[float]]

    @field_validator("matrix")
    @classmethod
    def _square_nonnegative(cls, matrix: list[list[float]]) -> list[list[float]]:
        n = len(matrix)
        for i, row in enumerate(matrix):
            if len(row) != n:
                raise ValueError(f"distortion row {i} has {len(row)} entries, expected {n}")
            if any(v < 0 for v in row):
                raise ValueError(f"distortion row {i} has negative entries: {row}")
        return matrix

    @classmethod
    def zero_one(cls, n: int) -> DistortionMatrix:
        """Hamming distortion: 0 on the diagonal, 1 elsewhere."""
        return cls(matrix=[[0.0 if i == j else 1.0 for j in range(n)] for i in range(n)])

    @property
    def n_states(self) -> int:
        return len(self.matrix)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=np.float64)

    def __call__(self, x: int, xhat: int) -> float:
        return self.matrix[x][xhat]


def step_cost(
    lam: float,
    u: int,
    d: DistortionFn | DistortionMatrix,
    x: float | int,
    xhat: float | int,
) -> float:
    """Per-step cost lambda*u + d(x, xhat).

    Real-valued sources use d(x - xhat); finite sources look up the table.
    """
    if isinstance(d, DistortionMatrix):
        return lam * u + d(int(x), int(xhat))
    return lam * u + float(d(x - xhat))
