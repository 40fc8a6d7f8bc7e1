"""Interacting Metropolis chains over a growing sequence of target levels.

One chain per level. Level 1 is an independence sampler driven by the level-1
proposal. A proposal at level n >= 2 picks a prefix uniformly at random from
the level-(n-1) reservoir of stored states and extends it with one proposal
block; it is accepted with probability min(1, w(candidate) / w(current))
where w is the incremental importance weight. Every level appends its current
state to its reservoir once per update, so reservoirs hold the full chain
history and double as the empirical measures the next level proposes from.
The running mean of the weights of all proposed candidates at level n
estimates the ratio of the level-n to level-(n-1) normalizing constants
(the level-1 constant itself at n = 1).

Randomness discipline: each level owns three counter-based streams (prefix
selection, acceptance, proposal blocks) derived deterministically from the
run seed, so runs are reproducible and sequential and parallel-lagged
interaction consume identical streams. With keyed_block_rng the block stream
is re-keyed per (level, update index), which makes runs that skip block
sampling on rejection bit-identical to runs that always sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (InitOutOfSupport, LevelOutOfRange, ModeMismatch,
                     NoProposalsYet, OutOfSupport)
from .targets import (NEG_INF, ProposalFamily, TargetSequence,
                      WeightBoundDiagnostic, observe_weight)

POS_INF = float("inf")

_MODES = ("sequential", "parallel-lagged")
_STORAGES = ("auto", "marginal", "full-path")


class ChainReservoir:
    """Stored states of one level's chain, in update order.

    entries[m] is the state after update m (entry 0 is the initial state; an
    initial population contributes its size in leading entries). In marginal
    storage an entry is the last coordinate block, otherwise the full path
    tuple; entry_lgs caches the log target density of full-path entries.
    """

    __slots__ = ("level", "marginal", "entries", "entry_lgs")

    def __init__(self, level, marginal, entries, entry_lgs=None):
        self.level = level
        self.marginal = marginal
        self.entries = entries
        self.entry_lgs = entry_lgs

    @property
    def count(self):
        return len(self.entries)


class NormConstAccumulator:
    """Running log-sum of incremental weights over proposed candidates."""

    __slots__ = ("level", "log_sum", "count")

    def __init__(self, level, log_sum=NEG_INF, count=0):
        self.level = level
        self.log_sum = log_sum
        self.count = count

    def add_log_weight(self, lw):
        ls = self.log_sum
        if lw == NEG_INF:
            pass  # zero-weight candidate still counts as a proposal
        elif ls == NEG_INF:
            self.log_sum = lw
        elif lw > ls:
            self.log_sum = lw + math.log1p(math.exp(ls - lw))
        else:
            self.log_sum = ls + math.log1p(math.exp(lw - ls))
        self.count += 1

    @property
    def log_mean(self):
        if self.count == 0:
            raise NoProposalsYet(f"no proposals at level {self.level}")
        if self.log_sum == NEG_INF:
            return NEG_INF
        return self.log_sum - math.log(self.count)

    @property
    def mean(self):
        lm = self.log_mean
        return 0.0 if lm == NEG_INF else math.exp(lm)


@dataclass(frozen=True)
class NormConstEstimates:
    """Per-level and chained normalizing-constant estimates in log domain.

    level_log_means[0] estimates the log of the level-1 constant; entry n-1
    for n >= 2 estimates the log ratio of the level-n to level-(n-1)
    constants. log_chained is the running sum, so log_chained[n-1] estimates
    the log of the level-n constant itself.
    """

    level_log_means: tuple
    log_chained: tuple
    counts: tuple

    @property
    def level_means(self):
        return tuple(0.0 if v == NEG_INF else math.exp(v) for v in self.level_log_means)


def window_start(i: int, burn_in: int) -> int:
    """First reservoir index inside the reporting window after update i.

    Zero until update burn_in, then it trails the update counter until it
    saturates at burn_in once i >= 2 * burn_in.
    """
    if i < 0 or burn_in < 0:
        raise ValueError("indices are nonnegative")
    return max(0, min(i - burn_in, burn_in))


def _stream(seed, level, purpose):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(level), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def _block_key(seed, level):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(level), 3))
    return ss.generate_state(2, np.uint64)


def _keyed_generator(key, update_index):
    # counter word 2 strides by 2**128 output blocks per update, so draws
    # within one update can never run into the next update's stream
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, update_index, 0]))


class SimcmcState:
    """Mutable state of one interacting-chain run. Built by init()."""

    __slots__ = (
        "targets", "proposals", "horizon", "frontier", "burn_in", "seed",
        "mode", "lagged", "storage", "marginal", "shortcut", "keyed_blocks",
        "window_proposals", "validate_support", "iteration", "init_sizes",
        "reservoirs", "accumulators", "current", "current_lw", "current_lg",
        "accepted", "diagnostic", "_rng_prefix", "_rng_accept", "_rng_block",
        "_rand_prefix", "_rand_accept", "_block_keys",
    )

    def _bind_fast_draws(self):
        self._rand_prefix = [g.random for g in self._rng_prefix]
        self._rand_accept = [g.random for g in self._rng_accept]


def _entry_log_weight(targets, proposals, n, path):
    """Incremental log-weight of a stored path; +inf marks a zero denominator."""
    block = path[-1]
    prefix = path[:-1]
    if proposals.log_weight_full is not None:
        return proposals.log_weight_full(n, prefix, block)
    lg_n = targets.log_density(n, path)
    if lg_n == NEG_INF:
        return NEG_INF
    lq = proposals.log_density(n, prefix, block)
    if n == 1:
        return lg_n - lq if lq != NEG_INF else POS_INF
    lg_prev = targets.log_density(n - 1, prefix)
    if lg_prev == NEG_INF or lq == NEG_INF:
        return POS_INF
    return lg_n - lg_prev - lq


def init(targets: TargetSequence, proposals: ProposalFamily, initial_paths,
         burn_in: int = 0, seed: int = 0, mode: str = "sequential",
         storage: str = "auto", shortcut=None, keyed_block_rng: bool = False,
         diagnostic: WeightBoundDiagnostic = None, validate_support: bool = False,
         window_proposals: bool = False) -> SimcmcState:
    """Build a run state from one initial path (or population) per level.

    initial_paths[n-1] seeds level n: either a single path tuple of n blocks
    or a list of such tuples (for example particles from another sampler), in
    which case the last one becomes the chain's current state. Fewer entries
    than the horizon leave the frontier short; extend_frontier grows it.
    storage "auto" selects marginal-only storage when both the targets and
    the proposals declare pairwise structure. shortcut None engages
    accept-before-sample whenever the proposal family declares its weights
    independent of the last block.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    if storage not in _STORAGES:
        raise ValueError(f"storage must be one of {_STORAGES}")
    if burn_in < 0:
        raise ValueError("burn_in is nonnegative")
    frontier = len(initial_paths)
    if not 1 <= frontier <= targets.horizon:
        raise LevelOutOfRange(f"need 1..{targets.horizon} initial levels, got {frontier}")
    pairwise = targets.pairwise and proposals.pairwise
    if storage == "auto":
        marginal = pairwise
    elif storage == "marginal":
        if not pairwise:
            raise ModeMismatch("marginal storage needs pairwise targets and proposals")
        marginal = True
    else:
        marginal = False
    if shortcut is None:
        shortcut = proposals.weight_independent_of_last
    if shortcut and proposals.log_weight_prefix is None:
        raise ValueError("shortcut needs proposals.log_weight_prefix")

    state = SimcmcState()
    state.targets = targets
    state.proposals = proposals
    state.horizon = targets.horizon
    state.frontier = frontier
    state.burn_in = burn_in
    state.seed = int(seed)
    state.mode = mode
    state.lagged = mode == "parallel-lagged"
    state.storage = "marginal" if marginal else "full-path"
    state.marginal = marginal
    state.shortcut = bool(shortcut)
    state.keyed_blocks = bool(keyed_block_rng)
    state.window_proposals = bool(window_proposals)
    state.validate_support = bool(validate_support)
    state.iteration = 0
    state.diagnostic = diagnostic
    state.reservoirs = []
    state.accumulators = []
    state.current = []
    state.current_lw = []
    state.current_lg = []
    state.accepted = []
    state.init_sizes = []

    for n, spec in enumerate(initial_paths, start=1):
        population = spec if isinstance(spec, list) else [spec]
        if not population:
            raise InitOutOfSupport(n, f"empty initial population at level {n}")
        entries, entry_lgs = [], []
        for path in population:
            if len(path) != n:
                raise InitOutOfSupport(n, f"initial path at level {n} has {len(path)} blocks")
            lg = targets.log_density(n, path)
            if lg == NEG_INF:
                raise InitOutOfSupport(n)
            entries.append(path[-1] if marginal else path)
            entry_lgs.append(lg)
        last = population[-1]
        lw = _entry_log_weight(targets, proposals, n, last)
        if lw == NEG_INF:
            raise InitOutOfSupport(n)
        if lw == POS_INF:
            raise InitOutOfSupport(n, f"zero proposal or prefix density at the level-{n} initial state")
        state.reservoirs.append(ChainReservoir(n, marginal, entries, None if marginal else entry_lgs))
        state.accumulators.append(NormConstAccumulator(n))
        state.current.append(entries[-1])
        state.current_lw.append(lw)
        state.current_lg.append(entry_lgs[-1])
        state.accepted.append(0)
        state.init_sizes.append(len(population))

    state._rng_prefix = [_stream(state.seed, lvl, 0) for lvl in range(1, state.horizon + 1)]
    state._rng_accept = [_stream(state.seed, lvl, 1) for lvl in range(1, state.horizon + 1)]
    state._rng_block = [_stream(state.seed, lvl, 2) for lvl in range(1, state.horizon + 1)]
    state._block_keys = [_block_key(state.seed, lvl) for lvl in range(1, state.horizon + 1)]
    state._bind_fast_draws()
    return state


def nested_paths(path):
    """All leading prefixes of a path: the usual one-path-per-level init."""
    return [tuple(path[:n]) for n in range(1, len(path) + 1)]


def _update_level(state, n, exclude_last):
    idx = n - 1
    acc = state.accumulators[idx]
    update_index = acc.count + 1
    proposals = state.proposals
    targets = state.targets
    marginal = state.marginal
    exp = math.exp

    prev_block = None
    prefix_lg = 0.0
    if n == 1:
        prefix = ()
    else:
        res_prev = state.reservoirs[idx - 1]
        entries_prev = res_prev.entries
        hi = len(entries_prev) - 1 if exclude_last else len(entries_prev)
        lo = 0
        if state.window_proposals and state.burn_in:
            lo = window_start(hi - 1, state.burn_in)
        j = lo + int(state._rand_prefix[idx]() * (hi - lo))
        raw = entries_prev[j]
        if marginal:
            prev_block = raw
            prefix = (raw,)
        else:
            prefix = raw
            prefix_lg = res_prev.entry_lgs[j]

    if state.keyed_blocks:
        block_rng = _keyed_generator(state._block_keys[idx], update_index)
    else:
        block_rng = state._rng_block[idx]

    diag = state.diagnostic
    cur_lw = state.current_lw[idx]

    if state.shortcut:
        lw = proposals.log_weight_prefix(n, prefix)
        acc.add_log_weight(lw)
        if diag is not None:
            observe_weight(diag, n, exp(lw) if lw < 700.0 else POS_INF)
        u = state._rand_accept[idx]()
        if lw != NEG_INF and (lw >= cur_lw or u < exp(lw - cur_lw)):
            block = proposals.sample(n, prefix, block_rng)
            state.accepted[idx] += 1
            state.current_lw[idx] = lw
            if marginal:
                state.current[idx] = block
            else:
                path = prefix + (block,)
                state.current[idx] = path
                state.current_lg[idx] = targets.log_density(n, path)
    else:
        block = proposals.sample(n, prefix, block_rng)
        lg_n = None
        if proposals.log_weight_full is not None:
            lw = proposals.log_weight_full(n, prefix, block)
        elif marginal:
            if n == 1:
                lg = targets.log_density(1, (block,))
                if lg == NEG_INF:
                    lw = NEG_INF
                else:
                    lq = proposals.log_density(1, (), block)
                    if lq == NEG_INF:
                        raise OutOfSupport("proposal family sampled a block of zero density at level 1")
                    lw = lg - lq
            else:
                inc = targets.log_increment(n, prev_block, block)
                if inc == NEG_INF:
                    lw = NEG_INF
                else:
                    lq = proposals.log_density(n, prefix, block)
                    if lq == NEG_INF:
                        raise OutOfSupport(f"proposal family sampled a block of zero density at level {n}")
                    lw = inc - lq
        else:
            path = prefix + (block,)
            lg_n = targets.log_density(n, path)
            if lg_n == NEG_INF:
                lw = NEG_INF
            else:
                lq = proposals.log_density(n, prefix, block)
                if lq == NEG_INF:
                    raise OutOfSupport(f"proposal family sampled a block of zero density at level {n}")
                lw = lg_n - prefix_lg - lq
        acc.add_log_weight(lw)
        if diag is not None:
            observe_weight(diag, n, exp(lw) if lw < 700.0 else POS_INF)
        u = state._rand_accept[idx]()
        if lw != NEG_INF and (lw >= cur_lw or u < exp(lw - cur_lw)):
            state.accepted[idx] += 1
            state.current_lw[idx] = lw
            if marginal:
                state.current[idx] = block
            else:
                path = prefix + (block,)
                state.current[idx] = path
                state.current_lg[idx] = lg_n if lg_n is not None else targets.log_density(n, path)

    res = state.reservoirs[idx]
    res.entries.append(state.current[idx])
    if not marginal:
        res.entry_lgs.append(state.current_lg[idx])


def sweep(state: SimcmcState) -> SimcmcState:
    """One full update of levels 1..frontier, in increasing level order.

    Sequential interaction lets level n see the level-(n-1) state appended
    this very sweep; parallel-lagged interaction excludes it, proposing from
    the previous sweep's reservoir exactly as concurrently running levels
    would.
    """
    state.iteration += 1
    lagged = state.lagged
    for n in range(1, state.frontier + 1):
        _update_level(state, n, lagged and n > 1)
    if state.validate_support:
        _validate_currents(state)
    return state


def _validate_currents(state):
    for n in range(1, state.frontier + 1):
        if state.current_lw[n - 1] == NEG_INF:
            raise OutOfSupport(f"current state at level {n} left the support")
        if not state.marginal and not state.targets.in_support(n, state.current[n - 1]):
            raise OutOfSupport(f"current state at level {n} left the support")


def accrue(state: SimcmcState, levels, updates=None, until=None) -> int:
    """Keep updating a contiguous band of levels outside the sweep cycle.

    levels is an inclusive (low, high) pair within 1..frontier. Each round
    updates the band once in increasing order, drawing prefixes from the full
    lower reservoirs. Stops after `updates` rounds or when `until(state)`
    turns true; returns the number of rounds performed. The sweep counter is
    untouched: accrual adds proposals only to the designated levels.
    """
    if state.lagged:
        raise ModeMismatch("accrual runs on sequentially interacting chains only")
    lo, hi = levels
    if not 1 <= lo <= hi <= state.frontier:
        raise LevelOutOfRange(f"levels {levels} outside 1..{state.frontier}")
    if updates is None and until is None:
        raise ValueError("need an update budget or a stop predicate")
    rounds = 0
    while updates is None or rounds < updates:
        if until is not None and until(state):
            break
        for n in range(lo, hi + 1):
            _update_level(state, n, False)
        rounds += 1
    return rounds


def staged(state: SimcmcState, iterations: int) -> SimcmcState:
    """Run the same per-level update rule with the two loops switched.

    Level n performs all `iterations` updates before level n+1 starts, so
    every level-(n+1) proposal draws its prefix from a finished lower
    reservoir. The total update count matches `iterations` sweeps, but the
    early-reservoir pollution that a sweep order drags through the whole run
    is confined to each level's own short settling stretch. Interleaved
    sweeps remain the right traversal when targets arrive over time; with the
    whole sequence known up front and the budget fixed, this order gives much
    tighter normalizing-constant estimates.
    """
    if iterations < 0:
        raise ValueError("iterations is nonnegative")
    for n in range(1, state.frontier + 1):
        accrue(state, (n, n), updates=iterations)
    state.iteration += iterations
    if state.validate_support:
        _validate_currents(state)
    return state


def extend_frontier(state: SimcmcState, max_tries: int = 1000,
                    seed_draws: int = 1) -> int:
    """Activate the next level, seeding it with an in-support extension.

    With seed_draws=1 the new level's initial state extends the current
    frontier state with proposal draws until one lands in the support. With
    seed_draws=k>1, k candidates are drawn (prefixes uniform from the lower
    reservoir, like a regular update) and the seed is sampled from them with
    probability proportional to its incremental weight, so the chain starts
    near its stationary law instead of at an arbitrary point; callers running
    on a proposal budget should charge k against it. Returns the new
    frontier. The new level starts with a single reservoir entry and no
    proposals; accrue or sweep to populate it.
    """
    if state.frontier >= state.horizon:
        raise LevelOutOfRange(f"frontier already at the horizon {state.horizon}")
    n = state.frontier + 1
    idx = n - 1
    if state.keyed_blocks:
        block_rng = _keyed_generator(state._block_keys[idx], 0)
    else:
        block_rng = state._rng_block[idx]
    targets, proposals = state.targets, state.proposals
    lower = state.reservoirs[idx - 1]
    prefix_rand = state._rng_prefix[idx].random

    def weigh(prefix, prefix_lg, block):
        if state.marginal:
            if proposals.log_weight_full is not None:
                return proposals.log_weight_full(n, prefix, block), 0.0, None
            inc = targets.log_increment(n, prefix[-1], block)
            if inc == NEG_INF:
                return NEG_INF, 0.0, None
            return inc - proposals.log_density(n, prefix, block), 0.0, None
        path = prefix + (block,)
        lg = targets.log_density(n, path)
        if lg == NEG_INF:
            return NEG_INF, lg, path
        if proposals.log_weight_full is not None:
            return proposals.log_weight_full(n, prefix, block), lg, path
        return lg - prefix_lg - proposals.log_density(n, prefix, block), lg, path

    best = None
    if seed_draws <= 1:
        base = state.current[idx - 1]
        prefix = (base,) if state.marginal else base
        for _ in range(max_tries):
            block = proposals.sample(n, prefix, block_rng)
            lw, lg, path = weigh(prefix, state.current_lg[idx - 1], block)
            if lw != NEG_INF:
                best = (lw, lg, block, path)
                break
    else:
        entries = lower.entries
        pool = []
        for _ in range(max(seed_draws, 1)):
            j = int(prefix_rand() * len(entries))
            raw = entries[j]
            prefix = (raw,) if state.marginal else raw
            prefix_lg = 0.0 if state.marginal else lower.entry_lgs[j]
            block = proposals.sample(n, prefix, block_rng)
            lw, lg, path = weigh(prefix, prefix_lg, block)
            if lw != NEG_INF:
                pool.append((lw, lg, block, path))
        if pool:
            # Importance-resample rather than argmax: a max-weight seed
            # starts the chain with an atypically high incumbent weight and
            # stalls acceptance until it is dislodged.
            top = max(c[0] for c in pool)
            weights = [math.exp(c[0] - top) for c in pool]
            u = prefix_rand() * sum(weights)
            acc_w = 0.0
            for c, w in zip(pool, weights):
                acc_w += w
                if u < acc_w:
                    best = c
                    break
            else:
                best = pool[-1]
    if best is None:
        raise InitOutOfSupport(n, f"no in-support extension found for level {n} in {max_tries} tries")
    lw, lg, block, path = best
    entry = block if state.marginal else path
    state.reservoirs.append(ChainReservoir(n, state.marginal, [entry], None if state.marginal else [lg]))
    state.accumulators.append(NormConstAccumulator(n))
    state.current.append(entry)
    state.current_lw.append(lw)
    state.current_lg.append(lg)
    state.accepted.append(0)
    state.init_sizes.append(1)
    state.frontier = n
    return n


def empirical_expectation(state: SimcmcState, n: int, f, needs_full_path: bool = False) -> float:
    """Mean of f over the level-n reservoir's burn-in window.

    The window drops the first window_start(i, burn_in) entries, where i is
    the index of the newest entry. f receives whatever the reservoir stores:
    full path tuples, or bare last blocks in marginal storage (set
    needs_full_path to fail fast in that case).
    """
    if not 1 <= n <= state.frontier:
        raise LevelOutOfRange(f"level {n} outside 1..{state.frontier}")
    if needs_full_path and state.marginal:
        raise ModeMismatch("reservoirs store only last blocks in marginal storage")
    entries = state.reservoirs[n - 1].entries
    lo = window_start(len(entries) - 1, state.burn_in)
    total = 0.0
    for m in range(lo, len(entries)):
        total += f(entries[m])
    return total / (len(entries) - lo)


def norm_const_estimates(state: SimcmcState) -> NormConstEstimates:
    """Current normalizing-constant estimates from all proposed candidates."""
    counts = tuple(acc.count for acc in state.accumulators)
    if any(c == 0 for c in counts):
        raise NoProposalsYet("every active level needs at least one proposal")
    level = tuple(acc.log_mean for acc in state.accumulators)
    chained = []
    running = 0.0
    for v in level:
        running = running + v if running != NEG_INF else NEG_INF
        if v == NEG_INF:
            running = NEG_INF
        chained.append(running)
    return NormConstEstimates(level, tuple(chained), counts)


def acceptance_rates(state: SimcmcState):
    """Fraction of accepted proposals per level since initialization."""
    if all(acc.count == 0 for acc in state.accumulators):
        raise NoProposalsYet("no proposals yet")
    rates = []
    for acc, accepted in zip(state.accumulators, state.accepted):
        rates.append(accepted / acc.count if acc.count else float("nan"))
    return tuple(rates)


# ---------------------------------------------------------------------------
# checkpointing

_CHECKPOINT_FORMAT = "simcmc-state"
_CHECKPOINT_VERSION = 1


def _encode_block(block, vector):
    return list(block) if vector else block


def _decode_block(block, vector):
    return tuple(block) if vector else block


def _encode_entry(entry, marginal, vector):
    if marginal:
        return _encode_block(entry, vector)
    return [_encode_block(b, vector) for b in entry]


def _decode_entry(entry, marginal, vector):
    if marginal:
        return _decode_block(entry, vector)
    return tuple(_decode_block(b, vector) for b in entry)


def _encode_rng(gen):
    st = gen.bit_generator.state
    return {
        "counter": [int(v) for v in st["state"]["counter"]],
        "key": [int(v) for v in st["state"]["key"]],
        "buffer": [int(v) for v in st["buffer"]],
        "buffer_pos": int(st["buffer_pos"]),
        "has_uint32": int(st["has_uint32"]),
        "uinteger": int(st["uinteger"]),
    }


def _decode_rng(payload):
    gen = np.random.Generator(np.random.Philox())
    gen.bit_generator.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array(payload["counter"], dtype=np.uint64),
            "key": np.array(payload["key"], dtype=np.uint64),
        },
        "buffer": np.array(payload["buffer"], dtype=np.uint64),
        "buffer_pos": payload["buffer_pos"],
        "has_uint32": payload["has_uint32"],
        "uinteger": payload["uinteger"],
    }
    return gen


def save_checkpoint(state: SimcmcState, path: str) -> None:
    """Dump the full run state as self-describing JSON, enough to resume bit-exactly."""
    vector = state.targets.block_dim > 1
    payload = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "seed": state.seed,
        "mode": state.mode,
        "storage": state.storage,
        "shortcut": state.shortcut,
        "keyed_block_rng": state.keyed_blocks,
        "window_proposals": state.window_proposals,
        "validate_support": state.validate_support,
        "burn_in": state.burn_in,
        "horizon": state.horizon,
        "frontier": state.frontier,
        "iteration": state.iteration,
        "vector_blocks": vector,
        "init_sizes": list(state.init_sizes),
        "accepted": list(state.accepted),
        "current": [_encode_entry(e, state.marginal, vector) for e in state.current],
        "current_lw": list(state.current_lw),
        "current_lg": list(state.current_lg),
        "reservoirs": [[_encode_entry(e, state.marginal, vector) for e in r.entries]
                       for r in state.reservoirs],
        "entry_lgs": None if state.marginal else [list(r.entry_lgs) for r in state.reservoirs],
        "accumulators": [{"log_sum": acc.log_sum, "count": acc.count}
                         for acc in state.accumulators],
        "rng": {
            "prefix": [_encode_rng(g) for g in state._rng_prefix],
            "accept": [_encode_rng(g) for g in state._rng_accept],
            "block": [_encode_rng(g) for g in state._rng_block],
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str, targets: TargetSequence, proposals: ProposalFamily,
                    diagnostic: WeightBoundDiagnostic = None) -> SimcmcState:
    """Rebuild a run state saved by save_checkpoint, with the same model objects."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != _CHECKPOINT_FORMAT:
        raise ValueError("not a checkpoint file")
    if payload.get("version") != _CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    if payload["horizon"] != targets.horizon:
        raise ValueError("checkpoint horizon does not match the target sequence")
    vector = payload["vector_blocks"]
    marginal = payload["storage"] == "marginal"

    state = SimcmcState()
    state.targets = targets
    state.proposals = proposals
    state.horizon = payload["horizon"]
    state.frontier = payload["frontier"]
    state.burn_in = payload["burn_in"]
    state.seed = payload["seed"]
    state.mode = payload["mode"]
    state.lagged = state.mode == "parallel-lagged"
    state.storage = payload["storage"]
    state.marginal = marginal
    state.shortcut = payload["shortcut"]
    state.keyed_blocks = payload["keyed_block_rng"]
    state.window_proposals = payload["window_proposals"]
    state.validate_support = payload["validate_support"]
    state.iteration = payload["iteration"]
    state.diagnostic = diagnostic
    state.init_sizes = list(payload["init_sizes"])
    state.accepted = list(payload["accepted"])
    state.current = [_decode_entry(e, marginal, vector) for e in payload["current"]]
    state.current_lw = list(payload["current_lw"])
    state.current_lg = list(payload["current_lg"])
    state.reservoirs = []
    lgs = payload["entry_lgs"]
    for i, entries in enumerate(payload["reservoirs"]):
        decoded = [_decode_entry(e, marginal, vector) for e in entries]
        state.reservoirs.append(ChainReservoir(i + 1, marginal, decoded,
                                               None if marginal else list(lgs[i])))
    state.accumulators = [NormConstAccumulator(i + 1, a["log_sum"], a["count"])
                          for i, a in enumerate(payload["accumulators"])]
    state._rng_prefix = [_decode_rng(p) for p in payload["rng"]["prefix"]]
    state._rng_accept = [_decode_rng(p) for p in payload["rng"]["accept"]]
    state._rng_block = [_decode_rng(p) for p in payload["rng"]["block"]]
    state._block_keys = [_block_key(state.seed, lvl) for lvl in range(1, state.horizon + 1)]
    state._bind_fast_draws()
    return state
