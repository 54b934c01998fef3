"""Per-observation sequential Monte Carlo with compiled proposals."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..compiler import build_factors, build_net, enumerate_net
from ..dsl.validate import Model
from ..dataio import Dataset
from ..trace import Trace
from .moves import sample_and_apply
from .particle import Particle, SmcConfig, particle_rng

log = logging.getLogger("relclean.smc")


class InferenceError(Exception):
    pass


@dataclass
class SmcStats:
    log_marginal: float = 0.0
    resamples: int = 0
    candidate_sizes: list = field(default_factory=list)


def effective_sample_size(logw: np.ndarray) -> float:
    m = logw.max()
    w = np.exp(logw - m)
    w = w / w.sum()
    return float(1.0 / np.sum(w * w))


def multinomial_resample(particles: list[Particle], rng) -> list[Particle]:
    logw = np.array([p.logw for p in particles])
    m = logw.max()
    w = np.exp(logw - m)
    w = w / w.sum()
    n = len(particles)
    idx = rng.choice(n, size=n, p=w)
    out = []
    used = set()
    for i in idx:
        i = int(i)
        if i in used:
            clone = particles[i].clone()
            clone.rng = particle_rng_from(particles[i])
            clone.trace.rng = clone.rng
            out.append(clone)
        else:
            used.add(i)
            out.append(particles[i])
    for p in out:
        p.logw = 0.0
    return out


_clone_counter = [0]


def particle_rng_from(parent: Particle):
    # derive a fresh deterministic stream for clones
    _clone_counter[0] += 1
    return particle_rng(int(parent.rng.integers(2**62)), 10_000 + _clone_counter[0])


def init_particles(model: Model, dataset: Dataset, config: SmcConfig) -> list[Particle]:
    _clone_counter[0] = 0
    out = []
    for i in range(config.particles):
        tr = Trace(model, dataset)
        rng = particle_rng(config.seed, i)
        out.append(Particle(tr, rng))
    return out


def smc_step(
    particles: list[Particle],
    row: int,
    model: Model,
    resample_rng,
    config: SmcConfig,
    stats: SmcStats,
) -> list[Particle]:
    """Advance every particle by one observation, subproblem by subproblem,
    reweighting and resampling on low ESS."""
    obs_cls = model.obs_class
    groups = model.classes[obs_cls].subproblems
    oids = []
    for p in particles:
        oids.append(p.trace.create_object(obs_cls, row=row))
    for gi, group in enumerate(groups):
        for p, oid in zip(particles, oids):
            net = build_net(p.trace, obs_cls, oid, group, row=row)
            factors = build_factors(p.trace, net)
            enum = enumerate_net(net, factors)
            logp, logq, _ = sample_and_apply(p.trace, net, enum, p.rng)
            p.logw += logp - logq
            for n in net.nodes:
                if n.kind == "chain" and len(n.path) == 1:
                    stats.candidate_sizes.append(
                        sum(1 for v in n.domain if not hasattr(v, "path"))
                    )
        particles = maybe_resample(particles, resample_rng, config, stats, row)
    return particles


def maybe_resample(particles, resample_rng, config, stats, row):
    logw = np.array([p.logw for p in particles])
    if np.all(np.isneginf(logw)):
        raise InferenceError(f"all particle weights are zero at row {row}")
    n = len(particles)
    if n == 1:
        return particles
    ess = effective_sample_size(logw)
    if ess < config.ess_threshold * n or np.any(np.isneginf(logw)):
        stats.log_marginal += _log_mean_exp(logw)
        stats.resamples += 1
        particles = multinomial_resample(particles, resample_rng)
        log.debug("resampled at row %s (ess=%.2f)", row, ess)
    return particles


def _log_mean_exp(logw: np.ndarray) -> float:
    m = logw.max()
    return float(m + np.log(np.mean(np.exp(logw - m))))


def finalize_log_marginal(particles, stats: SmcStats) -> float:
    logw = np.array([p.logw for p in particles])
    return stats.log_marginal + _log_mean_exp(logw)


def run_smc(
    model: Model,
    dataset: Dataset,
    config: SmcConfig,
    progress=None,
) -> tuple[list[Particle], SmcStats]:
    """Full SMC pass over the dataset, with optional rejuvenation sweeps at
    the end (and periodically when configured)."""
    from .rejuv import rejuvenation_sweep

    particles = init_particles(model, dataset, config)
    resample_rng = particle_rng(config.seed, 999_999)
    stats = SmcStats()
    t0 = time.perf_counter()
    for row in range(dataset.n_rows):
        particles = smc_step(particles, row, model, resample_rng, config, stats)
        if progress is not None:
            progress("row", row, particles)
        if log.isEnabledFor(logging.DEBUG):
            logw = np.array([p.logw for p in particles])
            log.debug(
                "row=%d wall_ms=%.1f ess=%.2f logz_so_far=%.3f",
                row,
                (time.perf_counter() - t0) * 1e3,
                effective_sample_size(logw),
                stats.log_marginal + _log_mean_exp(logw),
            )
        if config.rejuv_every and (row + 1) % config.rejuv_every == 0:
            for p in particles:
                rejuvenation_sweep(p, config, progress=progress)
    for _ in range(config.rejuv_sweeps):
        for p in particles:
            rejuvenation_sweep(p, config, progress=progress)
    return particles, stats


def best_particle(particles: list[Particle]) -> Particle:
    best = particles[0]
    for p in particles[1:]:
        if p.logw > best.logw:
            best = p
    return best
