"""Pre- and post-transmission belief filters.

Finite sources: F1(pi2) = pi2 P and F2 conditions on the channel symbol.
AR(1) error process: F1 scales the post-transmission density by a and
convolves with the noise; F2 conditions on the reception flag.
"""

from __future__ import annotations

import logging

import numpy as np

from remest.belief.types import (
    CONDITIONING_MASS_TOL,
    MASS_OVERFLOW_TOL,
    FinitePMF,
    GridDensity,
    Prescription,
    ThresholdPrescription,
)
from remest.errors import (
    DegenerateConditioningError,
    DimensionMismatchError,
    ModelValidationError,
)
from remest.models.channel import ChannelSymbol, Reception, SymbolTag
from remest.models.noise import NoiseSpec
from remest.models.source import FiniteMarkovSource

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------
# Finite alphabet
# ------------------------------------------------------------------


def f1_finite(post: FinitePMF, source: FiniteMarkovSource) -> FinitePMF:
    """Propagate the post-transmission belief one step: pi2 P."""
    if post.n != source.n_states:
        raise DimensionMismatchError(
            f"belief has {post.n} states, source has {source.n_states}"
        )
    return FinitePMF(post.probs @ source.matrix)


def f2_finite(pre: FinitePMF, phi: Prescription, y: ChannelSymbol) -> FinitePMF:
    """Condition the pre-transmission belief on the channel output.

    Raises:
        DegenerateConditioningError: blank1 observed although phi transmits
            on every state with positive probability.
    """
    if len(phi) != pre.n:
        raise DimensionMismatchError(f"prescription has {len(phi)} entries, belief has {pre.n}")
    if y.tag is SymbolTag.BLANK0:
        return pre
    if y.tag is SymbolTag.BLANK1:
        return pre.restricted(phi.silent_mask)
    x = y.value
    if not isinstance(x, int | np.integer) or not 0 <= x < pre.n:
        raise ModelValidationError(f"payload {x!r} is not in the alphabet 0..{pre.n - 1}")
    return FinitePMF.one_hot(pre.n, int(x))


# ------------------------------------------------------------------
# Error process
# ------------------------------------------------------------------


def _cell_edges(half_width: float, n_points: int) -> np.ndarray:
    m = n_points // 2
    h = 2.0 * half_width / (n_points - 1)
    return h * (np.arange(-m, m + 2, dtype=np.float64) - 0.5)


def _scaled_cell_masses(
    post: GridDensity, a: float, half_width: float, n_points: int
) -> np.ndarray:
    """Cell masses of a*E on the output grid, E distributed as ``post``.

    ``post`` is treated as piecewise constant on its cells, so the remap is
    mass-exact: output cell mass = CDF(edge_hi / |a|) - CDF(edge_lo / |a|).
    """
    edges_in = _cell_edges(post.half_width, post.n_points)
    cumulative = np.concatenate([[0.0], np.cumsum(post.cell_masses)])
    edges_out = _cell_edges(half_width, n_points)
    masses = np.diff(np.interp(edges_out / abs(a), edges_in, cumulative))
    if a < 0:
        masses = masses[::-1]
    return masses


def _noise_on_grid(noise: NoiseSpec, half_width: float, n_points: int) -> GridDensity:
    return GridDensity.from_noise(noise, half_width, n_points).normalized(MASS_OVERFLOW_TOL)


def f1_error(
    post: GridDensity,
    a: float,
    noise: NoiseSpec,
    received: bool,
    *,
    half_width: float | None = None,
    n_points: int | None = None,
) -> GridDensity:
    """Pre-transmission density of E_{t+1} = a E+_t + W_t.

    Args:
        post: Density of the post-transmission error E+_t.
        a: Source gain.
        noise: Law of W_t.
        received: Whether Y_t carried the source value (then E+_t = 0 and
            the result is the noise density itself).
        half_width: Output grid half-width; defaults to the input grid's.
        n_points: Output grid size; defaults to the input grid's.

    Returns:
        Unit-mass density on the output grid.

    Raises:
        TruncationOverflowError: More than 1e-6 of the mass left the grid.
    """
    half_width = post.half_width if half_width is None else half_width
    n_points = post.n_points if n_points is None else n_points
    if received:
        return _noise_on_grid(noise, half_width, n_points)

    scaled = _scaled_cell_masses(post, a, half_width, n_points)
    h = 2.0 * half_width / (n_points - 1)
    kernel = noise.cell_masses(h)
    k = kernel.size // 2
    # Direct summation; the kernel is symmetric so convolution equals correlation.
    full = np.convolve(scaled, kernel)
    cropped = full[k : k + n_points]
    result = GridDensity.from_cell_masses(half_width, np.clip(cropped, 0.0, None))
    logger.debug(
        "f1_error: a=%g, kernel taps=%d, pre-normalization mass=%.12f",
        a,
        kernel.size,
        result.mass,
    )
    return result.normalized(MASS_OVERFLOW_TOL)


def f2_error(pre: GridDensity, phi: ThresholdPrescription, h: Reception) -> GridDensity:
    """Post-transmission density of E+_t given the reception flag.

    Raises:
        DegenerateConditioningError: blank1 with no mass inside the threshold band.
    """
    if h is Reception.RECEIVED:
        return GridDensity.dirac(pre.half_width, pre.n_points)
    if h is Reception.BLANK0:
        return pre
    silent = np.abs(pre.points - phi.center) < phi.threshold
    masses = np.where(silent, pre.cell_masses, 0.0)
    total = masses.sum()
    if total <= CONDITIONING_MASS_TOL:
        raise DegenerateConditioningError(
            f"blank1 observed but the no-transmit band carries mass {total:.3g}"
        )
    return pre.with_cell_masses(masses / total)
