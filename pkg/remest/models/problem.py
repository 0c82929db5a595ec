"""Bundles of source, channel, distortion and communication price."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from remest.models.channel import GilbertElliottChannel
from remest.models.distortion import DistortionFn, DistortionMatrix
from remest.models.source import AR1Source, FiniteMarkovSource


class AR1Problem(BaseModel):
    """Remote estimation of an AR(1) source.

    Attributes:
        source: The AR(1) process.
        channel: Gilbert-Elliott channel (its initial distribution is S_{-1}'s).
        distortion: Even, nondecreasing distortion of the estimation error.
        lam: Price of one transmission attempt.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    source: AR1Source
    channel: GilbertElliottChannel
    distortion: DistortionFn = Field(default_factory=DistortionFn)
    lam: float = Field(..., ge=0, alias="lambda")

    def with_lambda(self, lam: float) -> AR1Problem:
        return self.model_copy(update={"lam": lam})


class FiniteProblem(BaseModel):
    """Remote estimation of a finite-alphabet Markov source.

    Attributes:
        source: The Markov chain, including the law of X_0.
        channel: Gilbert-Elliott channel (its initial distribution is S_{-1}'s).
        distortion: n x n distortion table.
        lam: Price of one transmission attempt.
    """

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    source: FiniteMarkovSource
    channel: GilbertElliottChannel
    distortion: DistortionMatrix
    lam: float = Field(..., ge=0, alias="lambda")

    @model_validator(mode="after")
    def _dimensions_agree(self) -> FiniteProblem:
        if self.distortion.n_states != self.source.n_states:
            raise ValueError(
                f"distortion is {self.distortion.n_states}x{self.distortion.n_states} "
                f"but the source has {self.source.n_states} states"
            )
        return self

    def with_lambda(self, lam: float) -> FiniteProblem:
        return self.model_copy(update={"lam": lam})
