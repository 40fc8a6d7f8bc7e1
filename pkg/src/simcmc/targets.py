"""Growing target sequences, proposal families, and incremental importance weights.

A target sequence assigns each level n = 1..P an unnormalized density over
paths of n coordinate blocks. A proposal family extends a path by one block.
The incremental weight of a path is the ratio of the level-n unnormalized
density to the product of the level-(n-1) density and the proposal density of
the last block; at level 1 the denominator is the proposal density alone.
Everything is computed in log domain, with -inf standing in for zero density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import LevelOutOfRange, OutOfSupport

NEG_INF = float("-inf")


@dataclass(frozen=True)
class TargetSequence:
    """Unnormalized densities for levels 1..horizon.

    log_density(n, path) returns the log unnormalized density of a length-n
    path (a tuple of blocks), -inf outside the support. log_increment, when
    provided, returns log_density(n, path) - log_density(n-1, path[:-1]) as a
    function of the last two blocks alone; models with that pairwise structure
    are eligible for marginal-only storage. block_dim describes the dimension
    of one coordinate block (1 for scalar state spaces).
    """

    horizon: int
    log_density: Callable[[int, tuple], float]
    block_dim: int = 1
    space_label: str = ""
    log_increment: Optional[Callable[[int, object, object], float]] = None
    support: Optional[Callable[[int, tuple], bool]] = None

    @property
    def pairwise(self) -> bool:
        return self.log_increment is not None

    def in_support(self, n: int, path: tuple) -> bool:
        if self.support is not None:
            return self.support(n, path)
        return self.log_density(n, path) > NEG_INF


@dataclass(frozen=True)
class ProposalFamily:
    """One-block extension kernels q_n for levels 1..horizon.

    sample(n, prefix, rng) draws the new block given the prefix path; at level
    1 the prefix is the empty tuple. log_density(n, prefix, block) evaluates
    the same kernel. When weight_independent_of_last is true the incremental
    weight does not depend on the sampled block and log_weight_prefix(n,
    prefix) must supply it, which lets a sampler decide acceptance before
    sampling. log_weight_full, when provided, is a fast evaluator for the full
    incremental log-weight and must agree with the generic route through the
    target densities. pairwise declares that the kernel reads only the last
    prefix block, which together with a pairwise target enables marginal-only
    storage.
    """

    sample: Callable[[int, tuple, object], object]
    log_density: Callable[[int, tuple, object], float]
    pairwise: bool = False
    weight_independent_of_last: bool = False
    log_weight_prefix: Optional[Callable[[int, tuple], float]] = None
    log_weight_full: Optional[Callable[[int, tuple, object], float]] = None


def _check_level(targets: TargetSequence, n: int) -> None:
    if not 1 <= n <= targets.horizon:
        raise LevelOutOfRange(f"level {n} outside 1..{targets.horizon}")


def check_support(targets: TargetSequence, n: int, path: tuple) -> bool:
    """True when the length-n path has positive target density."""
    _check_level(targets, n)
    return targets.in_support(n, path)


def log_weight(targets: TargetSequence, proposals: ProposalFamily, n: int, path: tuple) -> float:
    """Incremental log-weight of a length-n path.

    Level 1: log of target density over proposal density. Levels 2..P: log of
    the level-n density over the level-(n-1) density of the prefix times the
    proposal density of the last block. Raises OutOfSupport when any of those
    densities is zero, so a finite float is always returned.
    """
    _check_level(targets, n)
    if len(path) != n:
        raise ValueError(f"path has {len(path)} blocks, expected {n}")
    lg_n = targets.log_density(n, path)
    if lg_n == NEG_INF:
        raise OutOfSupport(f"path outside the level-{n} target support")
    if n == 1:
        lq = proposals.log_density(1, (), path[0])
        if lq == NEG_INF:
            raise OutOfSupport("level-1 proposal density is zero at the path")
        return lg_n - lq
    prefix = path[:-1]
    lg_prev = targets.log_density(n - 1, prefix)
    if lg_prev == NEG_INF:
        raise OutOfSupport(f"prefix outside the level-{n - 1} target support")
    lq = proposals.log_density(n, prefix, path[-1])
    if lq == NEG_INF:
        raise OutOfSupport(f"level-{n} proposal density is zero at the last block")
    return lg_n - lg_prev - lq


def acceptance_ratio(log_w_proposed: float, log_w_current: float) -> float:
    """min(1, w_proposed / w_current) from log-weights, without overflow."""
    if not (math.isfinite(log_w_proposed) and math.isfinite(log_w_current)):
        raise ValueError("acceptance_ratio needs finite log-weights")
    diff = log_w_proposed - log_w_current
    if diff >= 0.0:
        return 1.0
    # exp underflows to 0.0 for very negative diff, which is the right limit
    return math.exp(diff)


@dataclass
class WeightBoundDiagnostic:
    """Opt-in check that observed weights stay below declared bounds.

    The only mutable object in this module: observe_weight updates it in
    place. A violation sets an advisory flag per level, it never aborts a run.
    """

    declared_bounds: dict = field(default_factory=dict)
    observed_max: dict = field(default_factory=dict)
    violated_levels: set = field(default_factory=set)

    def bound_exceeded(self, n: int) -> bool:
        return n in self.violated_levels


def observe_weight(diagnostic: WeightBoundDiagnostic, n: int, weight: float) -> WeightBoundDiagnostic:
    """Feed one observed incremental weight (not its log) into the diagnostic."""
    if weight < 0.0:
        raise ValueError("weights are nonnegative")
    prev = diagnostic.observed_max.get(n, 0.0)
    if weight > prev:
        diagnostic.observed_max[n] = weight
    bound = diagnostic.declared_bounds.get(n)
    if bound is not None and weight > bound * (1.0 + 1e-12):
        diagnostic.violated_levels.add(n)
    return diagnostic
