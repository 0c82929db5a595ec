"""Belief filters and ASU / rearrangement / majorization utilities."""

from remest.belief.filters import f1_error, f1_finite, f2_error, f2_finite
from remest.belief.majorization import (
    centered_order,
    expected_distortion,
    is_asu,
    majorizes,
    matched_threshold,
    symmetric_decreasing_rearrangement,
    tail_masses,
)
from remest.belief.types import (
    FinitePMF,
    GridDensity,
    Prescription,
    ThresholdPrescription,
)

__all__ = [
    "FinitePMF",
    "GridDensity",
    "Prescription",
    "ThresholdPrescription",
    "centered_order",
    "expected_distortion",
    "f1_error",
    "f1_finite",
    "f2_error",
    "f2_finite",
    "is_asu",
    "majorizes",
    "matched_threshold",
    "symmetric_decreasing_rearrangement",
    "tail_masses",
]
