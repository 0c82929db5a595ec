"""Experiment configuration: YAML files validated into pydantic models.

A config has four sections::

    model:       source, channel, distortion, lambda
    solver:      horizon, grid, tolerances, guards
    simulation:  n_reps, seed, initial channel law, workers
    output:      directory, formats

Command-line overrides (``section.key=value``) are applied to the raw
mapping before validation, so they go through the same checks as the file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Annotated, Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from remest.errors import ConfigError
from remest.models.channel import GilbertElliottChannel
from remest.models.distortion import DistortionFn, DistortionMatrix
from remest.models.problem import AR1Problem, FiniteProblem
from remest.models.source import AR1Source, FiniteMarkovSource

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "REMEST_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

SourceConfig = Annotated[AR1Source | FiniteMarkovSource, Field(discriminator="kind")]
DistortionConfig = Annotated[DistortionFn | DistortionMatrix, Field(discriminator="kind")]


class ModelSection(BaseModel):
    """Source, channel, distortion and the price of a transmission.

    Attributes:
        source: ``kind: ar1`` or ``kind: finite``.
        channel: Gilbert-Elliott channel.
        distortion: A continuous distortion for AR(1) sources, a matrix for finite ones.
        lam: Price of one transmission attempt (YAML key ``lambda``).
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    source: SourceConfig
    channel: GilbertElliottChannel
    distortion: DistortionConfig = Field(default_factory=DistortionFn)
    lam: float = Field(..., ge=0, alias="lambda")

    @model_validator(mode="after")
    def _distortion_fits_source(self) -> ModelSection:
        if isinstance(self.source, AR1Source) and isinstance(self.distortion, DistortionMatrix):
            raise ValueError("an ar1 source needs a squared, absolute or even_power distortion")
        if isinstance(self.source, FiniteMarkovSource):
            if not isinstance(self.distortion, DistortionMatrix):
                raise ValueError("a finite source needs a matrix distortion")
            if self.distortion.n_states != self.source.n_states:
                raise ValueError(
                    f"distortion is {self.distortion.n_states}x{self.distortion.n_states} "
                    f"but the source has {self.source.n_states} states"
                )
        return self

    @property
    def is_finite(self) -> bool:
        return isinstance(self.source, FiniteMarkovSource)


class SolverSection(BaseModel):
    """Solver grid, tolerances and size guards."""

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    horizon: int = Field(..., ge=0)
    half_width: float | None = Field(None, gt=0)
    n_points: int = 4097
    refine: bool = False
    evenness_tol: float = Field(1e-9, ge=0)
    monotonicity_tol: float = Field(1e-9, ge=0)
    max_states: int = Field(4, ge=1)
    max_horizon: int = Field(5, ge=0)
    max_nodes: int = Field(1_000_000, ge=1)
    oracle_max_states: int = Field(2, ge=1)
    oracle_max_horizon: int = Field(2, ge=0)
    oracle_max_profiles: int = Field(100_000_000, ge=1)
    sweep_lambdas: list[float] = Field(default_factory=list)

    @field_validator("n_points")
    @classmethod
    def _odd_points(cls, n: int) -> int:
        if n < 3 or n % 2 == 0:
            raise ValueError(f"n_points must be odd and at least 3, got {n}")
        return n

    @field_validator("sweep_lambdas")
    @classmethod
    def _sorted_lambdas(cls, values: list[float]) -> list[float]:
        if any(v < 0 for v in values):
            raise ValueError(f"sweep lambdas must be nonnegative, got {values}")
        if values != sorted(values):
            raise ValueError(f"sweep lambdas must be sorted ascending, got {values}")
        return values


class SimulationSection(BaseModel):
    """Monte Carlo settings. The seed is always explicit."""

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    seed: int = Field(..., ge=0)
    n_reps: int = Field(10_000, ge=2)
    initial_channel: list[float] | None = None
    workers: int = Field(1, ge=1)
    trajectories: int = Field(0, ge=0)
    perturbation_deltas: list[float] = Field(default_factory=lambda: [-0.25, 0.25])


class OutputSection(BaseModel):
    """Where and how results are written."""

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    directory: str | None = None
    formats: list[Literal["json", "csv", "hdf5"]] = Field(default_factory=lambda: ["json", "csv"])


class ExperimentConfig(BaseModel):
    """A complete experiment."""

    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    model: ModelSection
    solver: SolverSection
    simulation: SimulationSection
    output: OutputSection = Field(default_factory=OutputSection)

    @property
    def is_finite(self) -> bool:
        return self.model.is_finite

    @property
    def seed(self) -> int:
        return self.simulation.seed

    def channel(self) -> GilbertElliottChannel:
        """Configured channel with the simulation's S_{-1} law applied."""
        return self.model.channel.with_initial(self.simulation.initial_channel)

    def problem(self) -> AR1Problem | FiniteProblem:
        if self.is_finite:
            return FiniteProblem(
                source=self.model.source,
                channel=self.channel(),
                distortion=self.model.distortion,
                lam=self.model.lam,
            )
        return AR1Problem(
            source=self.model.source,
            channel=self.channel(),
            distortion=self.model.distortion,
            lam=self.model.lam,
        )

    def output_dir(self) -> Path:
        """``output.directory``, else ``$REMEST_OUTPUT_DIR``, else ``results``."""
        if self.output.directory:
            return Path(self.output.directory)
        return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


# ------------------------------------------------------------------
# Loading
# ------------------------------------------------------------------


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"])
        lines.append(f"{location}: {error['msg']}")
    return "; ".join(lines)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping; field errors become one ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_format_errors(e)}") from e


def apply_override(data: dict[str, Any], assignment: str) -> None:
    """Apply ``section.key=value`` in place; ``value`` is parsed as YAML."""
    path, sep, raw = assignment.partition("=")
    if not sep or not path.strip():
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override value for {path} is not valid YAML: {e}") from e
    keys = path.strip().split(".")
    node = data
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override {path}: {key} is not a section")
        node = child
    node[keys[-1]] = value


def load_config(
    path: str | Path,
    overrides: list[str] | None = None,
    *,
    seed: int | None = None,
    output_dir: str | Path | None = None,
) -> ExperimentConfig:
    """Read a YAML experiment file and apply command-line overrides.

    Args:
        path: Config file.
        overrides: ``section.key=value`` assignments, applied in order.
        seed: Replaces ``simulation.seed``.
        output_dir: Replaces ``output.directory``.

    Raises:
        ConfigError: Missing or unreadable file, bad override, or invalid fields.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping of sections")

    for assignment in overrides or []:
        apply_override(data, assignment)
    if seed is not None:
        data.setdefault("simulation", {})["seed"] = seed
    if output_dir is not None:
        data.setdefault("output", {})["directory"] = str(output_dir)

    config = parse_config(data)
    logger.info("Loaded config %s (hash %s)", path, config_hash(config)[:12])
    return config


# ------------------------------------------------------------------
# Canonical form
# ------------------------------------------------------------------


def config_dict(config: ExperimentConfig) -> dict[str, Any]:
    return config.model_dump(mode="json", by_alias=True)


def canonical_yaml(config: ExperimentConfig) -> str:
    """Sorted-key YAML; parsing it back yields the same config."""
    return yaml.safe_dump(config_dict(config), sort_keys=True, default_flow_style=False)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON dump."""
    canonical = json.dumps(config_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
