"""Trait-parameterized instruction-following filter for the simulated driver.

The driver receives the advised speed and commands a delayed, offset,
noise-perturbed version of it: advice issued `reaction_delay` seconds ago,
plus a fixed intentional offset, plus fresh unit-variance white noise each
step. Before the first delayed advice is available the driver reports
no advice (the ego then falls back to car-following).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REACTION_DELAYS = (2.0, 3.0, 4.0, 5.0, 6.0)  # seconds
OFFSETS = (-7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5)  # m/s


@dataclass(frozen=True)
class DriverTraits:
    reaction_delay: float  # seconds, from REACTION_DELAYS
    offset: float  # m/s, from OFFSETS
    noise_enabled: bool = True

    def as_dict(self):
        return {
            "reaction_delay": self.reaction_delay,
            "offset": self.offset,
            "noise_enabled": self.noise_enabled,
        }


PERFECT_FOLLOWER = DriverTraits(reaction_delay=0.0, offset=0.0, noise_enabled=False)


def sample_traits(rng: np.random.Generator, noise_enabled: bool = True) -> DriverTraits:
    """Uniform draw over the discrete delay and offset sets."""
    return DriverTraits(
        reaction_delay=float(rng.choice(REACTION_DELAYS)),
        offset=float(rng.choice(OFFSETS)),
        noise_enabled=noise_enabled,
    )


class AdviceBuffer:
    """Per-episode history of advised speeds, indexed by step."""

    def __init__(self):
        self._advice: list[float] = []

    def push(self, advice: float):
        self._advice.append(float(advice))

    def __len__(self):
        return len(self._advice)

    def at(self, step: int) -> float:
        return self._advice[step]


def filter_advice(
    buffer: AdviceBuffer,
    t: int,
    traits: DriverTraits,
    rng: np.random.Generator,
    dt: float,
    v_max: float,
) -> float | None:
    """Driver-commanded speed at step t, or None while the delay window runs.

    t indexes steps since advising started; the buffer must hold advice
    for steps 0..t.
    """
    delay_steps = int(round(traits.reaction_delay / dt))
    if t < delay_steps:
        return None
    commanded = buffer.at(t - delay_steps) + traits.offset
    if traits.noise_enabled:
        commanded += rng.standard_normal()
    return float(np.clip(commanded, 0.0, v_max))
