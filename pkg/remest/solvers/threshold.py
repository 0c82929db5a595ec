"""Threshold dynamic program for AR(1) sources over a Gilbert-Elliott channel.

The error E_t = X_t - a*Xhat_{t-1} evolves on a symmetric grid. With s the
previous channel state,

    J0_t(e, s) = d(e) + Q_s0 E[J_{t+1}(ae+W, 0)] + Q_s1 E[J_{t+1}(ae+W, 1)]
    J1_t(e, s) = lam + Q_s0 d(e) + Q_s0 E[J_{t+1}(ae+W, 0)] + Q_s1 E[J_{t+1}(W, 1)]
    J_t        = min(J0_t, J1_t),   J_{T+1} = 0.

E_W uses cell-mass quadrature nodes at the grid spacing: the edge-clamped
layer J_{t+1} is convolved with the noise cell masses and the result is
linearly interpolated at a*e for every grid point e. The recursion does not
impose evenness; check_structure measures it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from remest.errors import GuardError, StructureViolationError
from remest.models.distortion import DistortionFn
from remest.models.noise import NoiseSpec
from remest.models.problem import AR1Problem
from remest.models.source import AR1Source

logger = logging.getLogger(__name__)

DEFAULT_N_POINTS = 4097

# Default half-width in units of the open-loop error scale.
_DEFAULT_WIDTH_UNITS = 20.0

_QUADRATURE_TOL = 1e-9


@dataclass(frozen=True)
class SolverGrid:
    """Symmetric error grid.

    Attributes:
        half_width: L; the grid spans [-L, L].
        n_points: Odd number of points, so 0 is a grid point.
    """

    half_width: float
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self) -> None:
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive and finite, got {self.half_width}")

    @classmethod
    def default_for(
        cls, source: AR1Source, horizon: int, n_points: int = DEFAULT_N_POINTS
    ) -> SolverGrid:
        """L = 20 * sigma_W * sqrt(sum_{j=0..T} a^(2j)), the open-loop error scale at T."""
        growth = sum(source.a ** (2 * j) for j in range(horizon + 1))
        return cls(_DEFAULT_WIDTH_UNITS * source.noise.std * math.sqrt(growth), n_points)

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

    def quadrature(self, noise: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
        """Noise nodes at multiples of the cell width and their cell-mass weights."""
        weights = noise.cell_masses(self.cell_width)
        total = weights.sum()
        if abs(total - 1.0) > _QUADRATURE_TOL:
            logger.debug("Quadrature weights sum to %.15f before normalization", total)
        k = weights.size // 2
        nodes = self.cell_width * np.arange(-k, k + 1, dtype=np.float64)
        return nodes, weights / total

    def operational_half_width(self, a: float, noise: NoiseSpec) -> float:
        """Largest |e| whose lookups a*e + W stay inside the grid."""
        return (self.half_width - noise.truncation_radius) / abs(a)

    def refined(self) -> SolverGrid:
        """Same span with 2n - 1 points (every old point kept)."""
        return SolverGrid(self.half_width, 2 * self.n_points - 1)


@dataclass
class ValueGrid:
    """Tabulated J_t(e, s) with the branch values J0 and J1.

    Attributes:
        grid: Error grid.
        lam: Price of a transmission.
        J: Shape (T+2, 2, n); J[T+1] is the zero terminal layer.
        J0: Shape (T+1, 2, n), no-transmit branch.
        J1: Shape (T+1, 2, n), transmit branch.
    """

    grid: SolverGrid
    lam: float
    J: np.ndarray
    J0: np.ndarray
    J1: np.ndarray
    elapsed_s: float = 0.0

    @property
    def horizon(self) -> int:
        return self.J0.shape[0] - 1

    def branch_difference(self, t: int, s: int) -> np.ndarray:
        """J0_t(e, s) - J1_t(e, s) on the whole grid."""
        return self.J0[t, s] - self.J1[t, s]

    def initial_value(self, initial_channel: np.ndarray | list[float]) -> float:
        """J_0(0, s) averaged over the distribution of S_{-1}."""
        m = self.grid.center_index
        return float(sum(initial_channel[s] * self.J[0, s, m] for s in (0, 1)))

    def rows(self):
        """Long-format rows (t, s, e, J, J0, J1) for t = 0..T."""
        points = self.grid.points
        for t in range(self.horizon + 1):
            for s in (0, 1):
                for i, e in enumerate(points):
                    yield t, s, e, self.J[t, s, i], self.J0[t, s, i], self.J1[t, s, i]


@dataclass
class ThresholdSchedule:
    """Thresholds k_t(s), s the previous channel state; ``inf`` never transmits.

    Attributes:
        k: Shape (T+1, 2).
        refined: Whether thresholds were refined inside their grid cell.
        sign_changes: Sign changes of J0 - J1 on e >= 0 per (t, s), when extracted.
    """

    k: np.ndarray
    refined: bool = False
    sign_changes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.k = np.asarray(self.k, dtype=np.float64)
        if self.k.ndim != 2 or self.k.shape[1] != 2:
            raise ValueError(f"threshold table must have shape (T+1, 2), got {self.k.shape}")
        if np.any(np.isnan(self.k)) or np.any(self.k < 0):
            raise ValueError("thresholds must be nonnegative (inf allowed)")

    @classmethod
    def constant(cls, horizon: int, value: float) -> ThresholdSchedule:
        """Same threshold everywhere: 0 always transmits, inf never does."""
        return cls(np.full((horizon + 1, 2), float(value)))

    @property
    def horizon(self) -> int:
        return self.k.shape[0] - 1

    def threshold(self, t: int, s: int) -> float:
        return float(self.k[t, s])

    def transmits(self, t: int, s: int, e: float) -> bool:
        return bool(abs(e) >= self.k[t, s])

    def shifted(
        self, delta: float, cells: list[tuple[int, int]] | None = None
    ) -> ThresholdSchedule:
        """Copy with ``delta`` added at ``cells`` (all when None), clipped at 0."""
        k = self.k.copy()
        if cells is None:
            cells = [(t, s) for t in range(k.shape[0]) for s in (0, 1)]
        for t, s in cells:
            k[t, s] = max(0.0, k[t, s] + delta)
        return ThresholdSchedule(k, refined=self.refined)

    def in_distortion_units(self, d: DistortionFn) -> np.ndarray:
        """d(k_t(s)): the distortion level at which transmission starts."""
        return np.where(np.isinf(self.k), np.inf, d(np.where(np.isinf(self.k), 0.0, self.k)))

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "refined": self.refined,
            "k": [[_encode(v) for v in row] for row in self.k],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ThresholdSchedule:
        k = np.array([[_decode(v) for v in row] for row in data["k"]], dtype=np.float64)
        schedule = cls(k, refined=bool(data.get("refined", False)))
        if "horizon" in data and int(data["horizon"]) != schedule.horizon:
            raise ValueError(
                f"policy declares horizon {data['horizon']} but has {schedule.horizon + 1} rows"
            )
        return schedule


def _encode(value: float) -> float | str:
    return "inf" if math.isinf(value) else float(value)


def _decode(value: float | str) -> float:
    return math.inf if value == "inf" else float(value)


# ------------------------------------------------------------------
# Backward induction
# ------------------------------------------------------------------


def backward_induction(
    problem: AR1Problem, horizon: int, grid: SolverGrid | None = None
) -> ValueGrid:
    """Solve the threshold DP on ``grid`` (default: :meth:`SolverGrid.default_for`).

    Raises:
        GuardError: The truncated noise support does not fit inside the grid.
    """
    started = time.monotonic()
    source, channel, d = problem.source, problem.channel, problem.distortion
    grid = grid or SolverGrid.default_for(source, horizon)
    points = grid.points
    n, m = grid.n_points, grid.center_index

    _, weights = grid.quadrature(source.noise)
    taps = weights.size // 2
    if taps >= m:
        raise GuardError(
            f"noise truncation radius {source.noise.truncation_radius:g} does not fit inside "
            f"the grid half-width {grid.half_width:g}"
        )
    operational = grid.operational_half_width(source.a, source.noise)
    if operational < 2.0 * source.noise.std:
        logger.warning(
            "Operational half-width %.3g is small; clamped extrapolation will bias J near the "
            "grid edge (half_width=%g)",
            operational,
            grid.half_width,
        )

    q = channel.matrix
    distortion = np.asarray(d(points), dtype=np.float64)
    shifted = source.a * points
    J = np.zeros((horizon + 2, 2, n))
    J0 = np.zeros((horizon + 1, 2, n))
    J1 = np.zeros((horizon + 1, 2, n))

    for t in range(horizon, -1, -1):
        expectation = []
        for s_next in (0, 1):
            padded = np.pad(J[t + 1, s_next], taps, mode="edge")
            smoothed = np.convolve(padded, weights, mode="valid")
            expectation.append(np.interp(shifted, points, smoothed))
        # E[J_{t+1}(W, 1)] is the e = 0 entry of the ON expectation.
        reset_value = expectation[1][m]
        for s in (0, 1):
            J0[t, s] = distortion + q[s, 0] * expectation[0] + q[s, 1] * expectation[1]
            J1[t, s] = (
                problem.lam
                + q[s, 0] * distortion
                + q[s, 0] * expectation[0]
                + q[s, 1] * reset_value
            )
            J[t, s] = np.minimum(J0[t, s], J1[t, s])
        logger.debug("Backed up layer t=%d", t)

    vg = ValueGrid(grid=grid, lam=problem.lam, J=J, J0=J0, J1=J1)
    vg.elapsed_s = time.monotonic() - started
    logger.info(
        "Threshold DP solved: T=%d, lambda=%g, grid=(L=%.4g, n=%d) in %.2fs",
        horizon,
        problem.lam,
        grid.half_width,
        n,
        vg.elapsed_s,
    )
    return vg


# ------------------------------------------------------------------
# Threshold extraction
# ------------------------------------------------------------------


def count_sign_changes(transmit: np.ndarray) -> int:
    return int(np.count_nonzero(transmit[1:] != transmit[:-1]))


def extract_thresholds(
    vg: ValueGrid, *, refine: bool = False, strict: bool = True
) -> ThresholdSchedule:
    """k_t(s) = smallest grid e >= 0 with J0 - J1 >= 0 (ties transmit).

    Args:
        vg: Solved value grid.
        refine: Place k at the root of the linear interpolant of J0 - J1
            inside the crossing cell instead of at the grid point.
        strict: Raise when J0 - J1 changes sign more than once on e >= 0.

    Raises:
        StructureViolationError: The no-transmit set on e >= 0 is not a prefix
            of the grid and ``strict`` is set.
    """
    points = vg.grid.points
    m = vg.grid.center_index
    horizon = vg.horizon
    k = np.full((horizon + 1, 2), np.inf)
    changes = np.zeros((horizon + 1, 2), dtype=np.int64)
    for t in range(horizon + 1):
        for s in (0, 1):
            diff = vg.branch_difference(t, s)[m:]
            transmit = diff >= 0.0
            changes[t, s] = count_sign_changes(transmit)
            if not transmit.any():
                continue
            first = int(np.argmax(transmit))
            if refine and first > 0:
                lo, hi = diff[first - 1], diff[first]
                k[t, s] = points[m + first - 1] + vg.grid.cell_width * (-lo) / (hi - lo)
            else:
                k[t, s] = points[m + first]
    violations = np.argwhere(changes > 1)
    if violations.size and strict:
        t, s = violations[0]
        raise StructureViolationError(
            f"J0 - J1 changes sign {changes[t, s]} times on e >= 0 at t={t}, s={s}; "
            "the grid is too coarse or the recursion failed"
        )
    if violations.size:
        logger.warning("Threshold structure violated at %d (t, s) cells", len(violations))
    return ThresholdSchedule(k, refined=refine, sign_changes=changes)


# ------------------------------------------------------------------
# Grid convergence
# ------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Threshold change between an n-point and a (2n - 1)-point solve.

    Attributes:
        coarse: Thresholds on the original grid.
        fine: Thresholds on the refined grid.
        max_change_cells: Largest |k_fine - k_coarse| in coarse cells (inf if
            one side never transmits and the other does).
    """

    coarse: ThresholdSchedule
    fine: ThresholdSchedule
    max_change_cells: float

    @property
    def needs_refinement(self) -> bool:
        return self.max_change_cells >= 1.0

    def to_dict(self) -> dict:
        return {
            "passed": not self.needs_refinement,
            "max_change_cells": self.max_change_cells,
            "needs_refinement": self.needs_refinement,
            "coarse": self.coarse.to_dict(),
            "fine": self.fine.to_dict(),
        }


def convergence_check(problem: AR1Problem, horizon: int, grid: SolverGrid) -> ConvergenceReport:
    """Solve on n and 2n - 1 points and compare thresholds."""
    coarse = extract_thresholds(backward_induction(problem, horizon, grid), strict=False)
    fine = extract_thresholds(backward_induction(problem, horizon, grid.refined()), strict=False)
    both_inf = np.isinf(coarse.k) & np.isinf(fine.k)
    gap = np.where(both_inf, 0.0, np.abs(fine.k - np.where(both_inf, 0.0, coarse.k)))
    report = ConvergenceReport(coarse, fine, float(gap.max() / grid.cell_width))
    logger.info("Grid convergence: max threshold change %.3g cells", report.max_change_cells)
    if report.needs_refinement:
        logger.warning("Thresholds moved by a cell or more on the refined grid; refine n_points")
    return report
