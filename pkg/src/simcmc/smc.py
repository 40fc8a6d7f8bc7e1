"""Particle-filter baseline: sequential importance sampling with stratified
resampling at every level, sharing the target/proposal abstractions of the
interacting-chain sampler so both methods consume identical weights.

The marginal-likelihood estimate accumulates the log of the mean
unnormalized incremental weight before each resampling pass; per-level
posterior summaries are taken from the weighted population at the same
point, since resampling only adds noise to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadWeights, Degenerate, ModeMismatch
from .targets import NEG_INF, ProposalFamily, TargetSequence

_WEIGHT_SUM_TOL = 1e-9


@dataclass
class ParticlePopulation:
    """A fixed-size weighted particle set at one level.

    particles/weights describe the population handed to the next level
    (uniform after resampling). estimate_particles/estimate_weights snapshot
    the weighted population before resampling; per-level summaries come from
    them. log_dens caches path log-densities in full-path storage.
    """

    level: int
    count: int
    marginal: bool
    particles: list
    weights: list
    log_likelihood: float
    rng: object
    log_dens: list = None
    estimate_particles: list = None
    estimate_weights: list = None
    log_likelihood_steps: list = field(default_factory=list)
    tracked: dict = None


def smc_init(targets: TargetSequence, proposals: ProposalFamily, count: int,
             seed: int = 0, storage: str = "auto") -> ParticlePopulation:
    """Empty level-0 population; the first step populates it."""
    if count < 1:
        raise ValueError("need at least one particle")
    if storage not in ("auto", "marginal", "full-path"):
        raise ValueError("storage must be auto, marginal, or full-path")
    pairwise = targets.pairwise and proposals.pairwise
    if storage == "marginal":
        if not pairwise:
            raise ModeMismatch("marginal storage needs pairwise targets and proposals")
        marginal = True
    else:
        marginal = pairwise if storage == "auto" else False
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=(0, 4))))
    return ParticlePopulation(
        level=0,
        count=count,
        marginal=marginal,
        particles=[],
        weights=[],
        log_likelihood=0.0,
        rng=rng,
        log_dens=None if marginal else [],
    )


def stratified_resample(weights, count: int, rng):
    """Ancestor indices with one uniform offset per stratum of width 1/count."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0:
        raise BadWeights("weights must be a nonempty vector")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise BadWeights("weights must be finite and nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > _WEIGHT_SUM_TOL:
        raise BadWeights(f"weights sum to {total!r}, not 1")
    if count < 1:
        raise ValueError("need at least one draw")
    positions = (np.arange(count) + rng.random(count)) / count
    cumulative = np.cumsum(w)
    idx = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(idx, len(w) - 1).tolist()


def smc_step(pop: ParticlePopulation, targets: TargetSequence,
             proposals: ProposalFamily, n: int) -> ParticlePopulation:
    """Advance the population one level: extend, weight, estimate, resample."""
    if n != pop.level + 1:
        raise ValueError(f"population is at level {pop.level}, cannot step to {n}")
    rng = pop.rng
    count = pop.count
    marginal = pop.marginal
    weight_full = proposals.log_weight_full
    increment = targets.log_increment
    extended, lws = [], []
    new_lgs = [] if not marginal else None

    for i in range(count):
        if n == 1:
            prefix = ()
            prev = None
        else:
            raw = pop.particles[i]
            prefix = (raw,) if marginal else raw
            prev = raw if marginal else None
        block = proposals.sample(n, prefix, rng)
        if weight_full is not None:
            lw = weight_full(n, prefix, block)
            lg = None
        elif marginal:
            if n == 1:
                lg_full = targets.log_density(1, (block,))
                lw = NEG_INF if lg_full == NEG_INF else lg_full - proposals.log_density(1, (), block)
            else:
                inc = increment(n, prev, block)
                lw = NEG_INF if inc == NEG_INF else inc - proposals.log_density(n, prefix, block)
            lg = None
        else:
            path = prefix + (block,)
            lg = targets.log_density(n, path)
            if lg == NEG_INF:
                lw = NEG_INF
            else:
                prev_lg = 0.0 if n == 1 else pop.log_dens[i]
                lw = lg - prev_lg - proposals.log_density(n, prefix, block)
        if marginal:
            extended.append(block)
        else:
            path = prefix + (block,)
            extended.append(path)
            new_lgs.append(lg if lg is not None else targets.log_density(n, path))
        lws.append(lw)

    top = max(lws)
    if top == NEG_INF:
        raise Degenerate(f"all particle weights vanished at level {n}")
    rel = [math.exp(lw - top) for lw in lws]
    total = sum(rel)
    log_mean = top + math.log(total / count)
    weights = [r / total for r in rel]

    ancestors = stratified_resample(weights, count, rng)
    particles = [extended[a] for a in ancestors]
    uniform = [1.0 / count] * count
    return ParticlePopulation(
        level=n,
        count=count,
        marginal=marginal,
        particles=particles,
        weights=uniform,
        log_likelihood=pop.log_likelihood + log_mean,
        rng=rng,
        log_dens=None if marginal else [new_lgs[a] for a in ancestors],
        estimate_particles=extended,
        estimate_weights=weights,
        log_likelihood_steps=pop.log_likelihood_steps + [pop.log_likelihood + log_mean],
    )


def weighted_summary(pop: ParticlePopulation, f):
    """Weighted mean of f over the pre-resampling population (scalar or tuple f)."""
    if pop.estimate_particles is None:
        raise ValueError("population has no weighted snapshot yet")
    acc = None
    for p, w in zip(pop.estimate_particles, pop.estimate_weights):
        v = f(p)
        if isinstance(v, tuple):
            if acc is None:
                acc = [0.0] * len(v)
            for j, vj in enumerate(v):
                acc[j] += w * vj
        else:
            if acc is None:
                acc = 0.0
            acc += w * v
    return tuple(acc) if isinstance(acc, list) else acc


def smc_run(targets: TargetSequence, proposals: ProposalFamily, count: int,
            seed: int = 0, per_step=None, storage: str = "auto",
            through: int = None) -> ParticlePopulation:
    """Run the filter through level `through` (default: the full horizon).

    per_step maps names to functions of one particle (path, or last block in
    marginal storage); their weighted means are recorded at every level in
    the returned population's `tracked` attribute.
    """
    pop = smc_init(targets, proposals, count, seed=seed, storage=storage)
    stop = targets.horizon if through is None else through
    hooks = per_step or {}
    tracked = {name: [] for name in hooks}
    for n in range(1, stop + 1):
        pop = smc_step(pop, targets, proposals, n)
        for name, fn in hooks.items():
            tracked[name].append(weighted_summary(pop, fn))
    pop.tracked = tracked
    return pop
