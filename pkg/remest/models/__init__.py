"""Source, channel, distortion, and cost models."""

from remest.models.channel import (
    OFF,
    ON,
    ChannelSymbol,
    GilbertElliottChannel,
    Reception,
    SymbolTag,
    channel_output,
    channel_step,
    initial_channel_state,
)
from remest.models.distortion import DistortionFn, DistortionMatrix, step_cost
from remest.models.noise import NoiseFamily, NoiseSpec
from remest.models.problem import AR1Problem, FiniteProblem
from remest.models.source import AR1Source, FiniteMarkovSource, ar1_step

__all__ = [
    "OFF",
    "ON",
    "AR1Problem",
    "AR1Source",
    "ChannelSymbol",
    "DistortionFn",
    "DistortionMatrix",
    "FiniteMarkovSource",
    "FiniteProblem",
    "GilbertElliottChannel",
    "NoiseFamily",
    "NoiseSpec",
    "Reception",
    "SymbolTag",
    "ar1_step",
    "channel_output",
    "channel_step",
    "initial_channel_state",
    "step_cost",
]
