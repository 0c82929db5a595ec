"""Numerical certificates for the threshold structure.

M0(y | e) = 1 - P(|a e + W| < y) is the probability that the next error
lands outside a band of half-width y when nothing was received; it must be
even in e and nondecreasing in |e|. M1(y) = 1 - P(|W| < y) is its
post-reception counterpart and cannot exceed M0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from remest.models.noise import NoiseSpec
from remest.solvers.threshold import ValueGrid, count_sign_changes

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_M0_TOLERANCE = 1e-12


def m0(y: np.ndarray | float, e: np.ndarray | float, a: float, noise: NoiseSpec) -> np.ndarray:
    """1 - integral_{-y}^{y} mu(a e + w) dw, from the closed-form CDF."""
    y = np.asarray(y, dtype=np.float64)
    shift = a * np.asarray(e, dtype=np.float64)
    inside = noise.cdf(y - shift) - noise.cdf(-y - shift)
    return np.clip(1.0 - inside, 0.0, 1.0)


def m1_tail(y: np.ndarray | float, noise: NoiseSpec) -> np.ndarray:
    """1 - integral_{-y}^{y} mu(w) dw; does not depend on the previous error."""
    return np.clip(2.0 * noise.sf(np.asarray(y, dtype=np.float64)), 0.0, 1.0)


@dataclass
class StructureReport:
    """Result of :func:`check_structure`.

    Attributes:
        terminal_zero: Whether J_{T+1} is exactly zero.
        max_min_identity_violation: max |J - min(J0, J1)|.
        max_evenness_violation: max |J_t(e, s) - J_t(-e, s)|.
        evenness_scale: max(1, max |J_t|); the evenness gate is tolerance * evenness_scale.
        max_monotonicity_violation: Largest decrease of J_t along e >= 0.
        max_m0_violation: Largest decrease of M0(y | e) along e >= 0.
        max_m0_evenness_violation: max |M0(y | e) - M0(y | -e)|.
        max_m1_excess: max (M1(y) - M0(y | e)), which should not be positive.
        sign_changes: Sign changes of J0 - J1 on e >= 0, shape (T+1, 2).
        tolerance: Gate for the evenness check.
        monotonicity_tolerance: Gate for the monotonicity check.
        m0_tolerance: Gate for the M0 checks.
    """

    terminal_zero: bool
    max_min_identity_violation: float
    max_evenness_violation: float
    max_monotonicity_violation: float
    max_m0_violation: float
    max_m0_evenness_violation: float
    max_m1_excess: float
    sign_changes: np.ndarray
    evenness_scale: float = 1.0
    tolerance: float = DEFAULT_TOLERANCE
    monotonicity_tolerance: float = DEFAULT_TOLERANCE
    m0_tolerance: float = DEFAULT_M0_TOLERANCE

    @property
    def max_sign_changes(self) -> int:
        return int(self.sign_changes.max())

    @property
    def passed(self) -> bool:
        return (
            self.terminal_zero
            and self.max_min_identity_violation == 0.0
            and self.max_evenness_violation <= self.tolerance * self.evenness_scale
            and self.max_monotonicity_violation <= self.monotonicity_tolerance
            and self.max_m0_violation <= self.m0_tolerance
            and self.max_m0_evenness_violation <= self.m0_tolerance
            and self.max_m1_excess <= self.m0_tolerance
            and self.max_sign_changes <= 1
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "terminal_zero": self.terminal_zero,
            "max_min_identity_violation": self.max_min_identity_violation,
            "max_evenness_violation": self.max_evenness_violation,
            "evenness_scale": self.evenness_scale,
            "max_monotonicity_violation": self.max_monotonicity_violation,
            "max_m0_violation": self.max_m0_violation,
            "max_m0_evenness_violation": self.max_m0_evenness_violation,
            "max_m1_excess": self.max_m1_excess,
            "max_sign_changes": self.max_sign_changes,
            "sign_changes": self.sign_changes.tolist(),
            "tolerance": self.tolerance,
            "monotonicity_tolerance": self.monotonicity_tolerance,
            "m0_tolerance": self.m0_tolerance,
        }


def m0_violations(
    noise: NoiseSpec,
    a: float,
    *,
    y_max: float | None = None,
    e_max: float | None = None,
    n_y: int = 200,
    n_e: int = 200,
) -> tuple[float, float, float]:
    """Monotonicity, evenness and M1-dominance violations of M0 on a (y, e >= 0) grid."""
    radius = noise.truncation_radius
    y = np.linspace(0.0, radius if y_max is None else y_max, n_y)[:, None]
    e = np.linspace(0.0, radius if e_max is None else e_max, n_e)[None, :]
    table = m0(y, e, a, noise)
    monotonicity = float(np.max(np.clip(table[:, :-1] - table[:, 1:], 0.0, None)))
    evenness = float(np.max(np.abs(table - m0(y, -e, a, noise))))
    excess = float(np.max(m1_tail(y, noise) - table))
    return monotonicity, evenness, max(excess, 0.0)


def check_structure(
    vg: ValueGrid,
    noise: NoiseSpec,
    a: float,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    monotonicity_tolerance: float = DEFAULT_TOLERANCE,
    m0_tolerance: float = DEFAULT_M0_TOLERANCE,
) -> StructureReport:
    """Evenness, EI monotonicity and branch-crossing counts of a solved value grid."""
    m = vg.grid.center_index
    layers = vg.J[: vg.horizon + 1]
    evenness = float(np.max(np.abs(layers - layers[..., ::-1])))
    # Roundoff in the mirrored halves grows with the magnitude of J.
    scale = max(1.0, float(np.max(np.abs(layers))))
    half = layers[..., m:]
    monotonicity = float(np.max(np.clip(half[..., :-1] - half[..., 1:], 0.0, None)))
    identity = float(np.max(np.abs(layers - np.minimum(vg.J0, vg.J1))))

    changes = np.zeros((vg.horizon + 1, 2), dtype=np.int64)
    for t in range(vg.horizon + 1):
        for s in (0, 1):
            changes[t, s] = count_sign_changes(vg.branch_difference(t, s)[m:] >= 0.0)

    m0_mono, m0_even, m1_excess = m0_violations(noise, a)
    report = StructureReport(
        terminal_zero=bool(np.all(vg.J[vg.horizon + 1] == 0.0)),
        max_min_identity_violation=identity,
        max_evenness_violation=evenness,
        max_monotonicity_violation=monotonicity,
        max_m0_violation=m0_mono,
        max_m0_evenness_violation=m0_even,
        max_m1_excess=m1_excess,
        sign_changes=changes,
        evenness_scale=scale,
        tolerance=tolerance,
        monotonicity_tolerance=monotonicity_tolerance,
        m0_tolerance=m0_tolerance,
    )
    logger.info(
        "Structure check: evenness=%.3g, monotonicity=%.3g, m0=%.3g, max sign changes=%d",
        evenness,
        monotonicity,
        m0_mono,
        report.max_sign_changes,
    )
    return report
