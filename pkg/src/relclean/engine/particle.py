"""Particles, configuration, and counter-based RNG streams."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..trace import Trace


def particle_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent, reproducible stream: Philox keyed by (seed, stream)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class SmcConfig:
    particles: int = 2
    ess_threshold: float = 0.5  # resample when ESS < threshold * particles
    rejuv_sweeps: int = 1
    rejuv_every: int = 0  # optional periodic sweeps every k rows (0 = off)
    kernel: str = "mh"  # "mh" | "pgibbs"
    pgibbs_particles: int = 10
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particle count must be >= 1")
        if not (0.0 < self.ess_threshold <= 1.0):
            raise ValueError("ESS threshold must be in (0, 1]")
        if self.kernel not in ("mh", "pgibbs"):
            raise ValueError(f"unknown rejuvenation kernel {self.kernel!r}")


class Particle:
    def __init__(self, trace: Trace, rng, logw: float = 0.0):
        self.trace = trace
        self.rng = rng
        self.logw = logw
        trace.rng = rng

    def clone(self) -> "Particle":
        tr = self.trace
        memo = {
            id(tr.model): tr.model,
            id(tr.dataset): tr.dataset,
            id(tr.preamble_env): tr.preamble_env,
            id(tr.rng): None,
        }
        new_trace = copy.deepcopy(tr, memo)
        p = Particle(new_trace, self.rng, self.logw)
        return p
