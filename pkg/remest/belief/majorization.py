"""Symmetric decreasing rearrangement, majorization, and ASU checks on grids.

Majorization is the concentration order: xi majorizes pi when, at every
radius, the rearrangement of xi carries no more tail mass than that of pi
(up to ``tol``). A Dirac at 0 majorizes every density on the grid.
"""

from __future__ import annotations

import numpy as np

from remest.belief.types import FinitePMF, GridDensity, ThresholdPrescription
from remest.errors import GridMismatchError, ModelValidationError
from remest.models.distortion import DistortionFn, DistortionMatrix

# Relative tolerance for treating two candidate estimates as tied.
_TIE_RTOL = 1e-12


def centered_order(n_points: int) -> np.ndarray:
    """Grid indices in placement order 0, +h, -h, +2h, -2h, ..."""
    m = n_points // 2
    order = np.empty(n_points, dtype=np.int64)
    order[0] = m
    order[1::2] = m + np.arange(1, m + 1)
    order[2::2] = m - np.arange(1, m + 1)
    return order


def symmetric_decreasing_rearrangement(f: GridDensity) -> GridDensity:
    """Cell values sorted descending and placed outward from the center."""
    ranked = np.sort(f.values)[::-1]
    values = np.empty_like(ranked)
    values[centered_order(f.n_points)] = ranked
    return GridDensity(f.half_width, values)


def tail_masses(f: GridDensity) -> np.ndarray:
    """Mass of the rearrangement of ``f`` on cells with |i| >= r, for r = 0..m."""
    ranked = np.sort(f.cell_masses)[::-1]
    suffix = np.cumsum(ranked[::-1])[::-1]
    m = f.center_index
    tails = np.empty(m + 1)
    tails[0] = suffix[0]
    tails[1:] = suffix[1::2]
    return tails


def majorizes(xi: GridDensity, pi: GridDensity, tol: float = 1e-9) -> bool:
    """True iff xi is at least as concentrated as pi at every grid radius."""
    if not xi.same_grid(pi):
        raise GridMismatchError(
            f"grids differ: ({xi.half_width}, {xi.n_points}) vs ({pi.half_width}, {pi.n_points})"
        )
    return bool(np.all(tail_masses(xi) <= tail_masses(pi) + tol))


def is_asu(f: GridDensity, center: float, tol: float) -> bool:
    """Whether ``f`` is symmetric and unimodal about the grid point ``center``."""
    h = f.cell_width
    index = int(round((center + f.half_width) / h))
    if not 0 <= index < f.n_points or abs(f.points[index] - center) > 1e-9 * h:
        raise ModelValidationError(f"center {center} is not a grid point")
    values = f.values
    reach = min(index, f.n_points - 1 - index)
    left = values[index - reach : index + 1][::-1]
    right = values[index : index + reach + 1]
    if np.any(np.abs(left - right) > tol):
        return False
    right_tail = values[index:]
    left_tail = values[: index + 1][::-1]
    return bool(np.all(np.diff(right_tail) <= tol) and np.all(np.diff(left_tail) <= tol))


def expected_distortion(
    post: GridDensity | FinitePMF,
    d: DistortionFn | DistortionMatrix,
) -> tuple[float, float | int]:
    """Minimum expected distortion and the minimizing estimate.

    Grid densities minimize over grid-point candidates; near-ties resolve to
    the candidate closest to 0 (then the nonnegative one). Finite beliefs
    minimize over the alphabet; ties resolve to the smallest index.

    Returns:
        Tuple of (minimum value, minimizing estimate).
    """
    if isinstance(post, FinitePMF):
        if not isinstance(d, DistortionMatrix):
            raise ModelValidationError("finite beliefs need a distortion matrix")
        if d.n_states != post.n:
            raise ModelValidationError(
                f"distortion is {d.n_states}x{d.n_states}, belief has {post.n} states"
            )
        costs = post.probs @ d.array
        best = int(np.argmin(costs))
        return float(costs[best]), best

    n, h = post.n_points, post.cell_width
    offsets = h * np.arange(-(n - 1), n, dtype=np.float64)
    kernel = np.asarray(d(offsets), dtype=np.float64)
    # costs[j] = h * sum_i values[i] * d(x_i - x_j); d is even.
    costs = h * np.convolve(post.values, kernel)[n - 1 : 2 * n - 1]
    lowest = costs.min()
    tied = np.flatnonzero(costs <= lowest + _TIE_RTOL * max(1.0, abs(lowest)))
    distance = np.abs(tied - post.center_index)
    best = int(tied[np.lexsort((-tied, distance))[0]])
    return float(costs[best]), float(post.points[best])


def matched_threshold(density: GridDensity, target_mass: float) -> ThresholdPrescription:
    """Widest centered threshold whose no-transmit band carries at most ``target_mass``.

    The band {|e| < k} covers the cells |i| < r; the returned k sits half a
    cell beyond the last silent point, so no grid point lies on the boundary.
    """
    masses = density.cell_masses
    m = density.center_index
    band = 0.0
    radius = 0
    while radius <= m:
        extra = masses[m] if radius == 0 else masses[m + radius] + masses[m - radius]
        if band + extra > target_mass:
            break
        band += extra
        radius += 1
    if radius == 0:
        return ThresholdPrescription(0.0, 0.0)
    return ThresholdPrescription(0.0, (radius - 0.5) * density.cell_width)
