"""Shared test fixtures for the remest test suite."""

from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from remest.models import (
    AR1Problem,
    AR1Source,
    DistortionFn,
    DistortionMatrix,
    FiniteMarkovSource,
    FiniteProblem,
    GilbertElliottChannel,
    NoiseSpec,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs" / "experiments"

CALIBRATION_P = [[0.9, 0.1], [0.2, 0.8]]
CALIBRATION_Q = [[0.7, 0.3], [0.2, 0.8]]
ALWAYS_ON = [[0.0, 1.0], [0.0, 1.0]]


def _calibration_problem(lam: float = 0.4, initial_channel: list[float] | None = None):
    """Binary source, bursty channel, 0-1 distortion."""
    return FiniteProblem(
        source=FiniteMarkovSource(transition=CALIBRATION_P, initial=[0.5, 0.5]),
        channel=GilbertElliottChannel(
            q=CALIBRATION_Q, initial_state_dist=initial_channel or [0.5, 0.5]
        ),
        distortion=DistortionMatrix.zero_one(2),
        lam=lam,
    )


def _ar1_problem(
    a: float = 1.0,
    lam: float = 1.0,
    q: list[list[float]] | None = None,
    family: str = "gaussian",
    scale: float = 1.0,
    distortion: str = "squared",
    initial_channel: list[float] | None = None,
) -> AR1Problem:
    """AR(1) instance with unit noise over the calibration channel by default."""
    return AR1Problem(
        source=AR1Source(a=a, noise=NoiseSpec(family=family, scale=scale)),
        channel=GilbertElliottChannel(
            q=q or CALIBRATION_Q, initial_state_dist=initial_channel or [0.5, 0.5]
        ),
        distortion=DistortionFn(kind=distortion),
        lam=lam,
    )


def _experiment_data(**solver) -> dict:
    """Raw config mapping for the calibration instance."""
    return {
        "model": {
            "source": {"kind": "finite", "transition": CALIBRATION_P, "initial": [0.5, 0.5]},
            "channel": {"q": CALIBRATION_Q, "initial_state_dist": [0.5, 0.5]},
            "distortion": {"kind": "matrix", "matrix": [[0.0, 1.0], [1.0, 0.0]]},
            "lambda": 0.4,
        },
        "solver": {"horizon": 2, **solver},
        "simulation": {"seed": 20240, "n_reps": 2000},
    }


def _ar1_experiment_data(**solver) -> dict:
    """Raw config mapping for a small random-walk instance."""
    return {
        "model": {
            "source": {"kind": "ar1", "a": 1.0, "noise": {"family": "gaussian", "scale": 1.0}},
            "channel": {"q": CALIBRATION_Q, "initial_state_dist": [0.4, 0.6]},
            "distortion": {"kind": "squared"},
            "lambda": 2.0,
        },
        "solver": {"horizon": 3, "n_points": 1025, **solver},
        "simulation": {"seed": 1234, "n_reps": 4000, "trajectories": 2},
    }


def _write_config(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


@pytest.fixture()
def calibration_problem() -> FiniteProblem:
    return _calibration_problem()


@pytest.fixture()
def calibration_config(tmp_path: Path) -> Path:
    """Calibration config written to tmp_path, output directed into tmp_path."""
    data = _experiment_data()
    data["output"] = {"directory": str(tmp_path / "out")}
    return _write_config(tmp_path / "calibration.yaml", data)


@pytest.fixture()
def ar1_config(tmp_path: Path) -> Path:
    """Small AR(1) config written to tmp_path, output directed into tmp_path."""
    data = _ar1_experiment_data()
    data["output"] = {"directory": str(tmp_path / "out")}
    return _write_config(tmp_path / "ar1.yaml", data)
