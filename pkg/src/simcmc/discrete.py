"""Exact finite-state verification of the interacting-chain construction.

For a target sequence on a small discrete alphabet everything is enumerable:
normalizing constants, level marginals, the per-level Metropolis transition
matrix for any proposal mixture, its invariant law, and the identity that the
ratio of successive normalizing constants is the mean incremental weight
under (previous target x proposal). These exact objects are the reference the
Monte Carlo samplers are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ZeroMass
from .targets import NEG_INF, ProposalFamily, TargetSequence


@dataclass(frozen=True)
class DiscreteTargetSequence:
    """Tabulated unnormalized targets and proposals on alphabet {0..K-1}.

    density_tables[n-1] has shape (K,)*n and holds the unnormalized level-n
    density. proposal_tables[0] has shape (K,) and is the level-1 proposal;
    proposal_tables[n-1] has shape (K,)*n whose last axis is the new block and
    is normalized for every prefix.
    """

    density_tables: tuple
    proposal_tables: tuple

    def __post_init__(self):
        if len(self.density_tables) != len(self.proposal_tables):
            raise ValueError("density_tables and proposal_tables must have equal length")
        k = self.density_tables[0].shape[0]
        for n, (g, q) in enumerate(zip(self.density_tables, self.proposal_tables), start=1):
            if g.shape != (k,) * n:
                raise ValueError(f"density table at level {n} has shape {g.shape}, expected {(k,) * n}")
            if q.shape != (k,) * n:
                raise ValueError(f"proposal table at level {n} has shape {q.shape}, expected {(k,) * n}")
            if (g < 0).any() or (q < 0).any():
                raise ValueError(f"negative entries in level-{n} tables")
            sums = q.sum(axis=-1)
            if not np.allclose(sums, 1.0, atol=1e-12):
                raise ValueError(f"proposal rows at level {n} are not normalized")

    @property
    def alphabet_size(self) -> int:
        return self.density_tables[0].shape[0]

    @property
    def horizon(self) -> int:
        return len(self.density_tables)


@dataclass(frozen=True)
class ExactTables:
    """Enumerated truth for one DiscreteTargetSequence.

    norm_consts[n-1] is the sum of the level-n table. marginals[n-1] is the
    normalized level-n law. prefix_marginals[n-1] (levels >= 2) is the level-n
    law of the first n-1 blocks. level_ratios[n-1] (levels >= 2) is the ratio
    of the level-n prefix marginal to the level-(n-1) law, zero where the
    latter vanishes.
    """

    norm_consts: tuple
    marginals: tuple
    prefix_marginals: tuple
    level_ratios: tuple


def enumerate_exact(dts: DiscreteTargetSequence) -> ExactTables:
    """Exact normalizing constants and marginals by full enumeration."""
    zs, pis, prefs, ratios = [], [], [None], [None]
    for n, table in enumerate(dts.density_tables, start=1):
        z = float(table.sum())
        if z <= 0.0:
            raise ZeroMass(f"level-{n} table sums to zero")
        zs.append(z)
        pis.append(table / z)
    for n in range(2, dts.horizon + 1):
        pref = pis[n - 1].sum(axis=-1)
        prev = pis[n - 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(prev > 0.0, pref / np.where(prev > 0.0, prev, 1.0), 0.0)
        prefs.append(pref)
        ratios.append(ratio)
    return ExactTables(tuple(zs), tuple(pis), tuple(prefs), tuple(ratios))


def _weight_table(dts: DiscreteTargetSequence, n: int) -> np.ndarray:
    """Incremental weights w_n over all length-n paths (0 outside support)."""
    g_n = dts.density_tables[n - 1]
    q_n = dts.proposal_tables[n - 1]
    if n == 1:
        denom = q_n
    else:
        denom = dts.density_tables[n - 2][..., None] * q_n
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(g_n > 0.0, g_n / np.where(denom > 0.0, denom, 1.0), 0.0)
        w = np.where((g_n > 0.0) & (denom == 0.0), np.inf, w)
    return w


def build_kernel_matrix(dts: DiscreteTargetSequence, n: int, mu: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-stochastic Metropolis transition matrix over all length-n paths.

    Candidates are drawn from the level-1 proposal when n == 1 and otherwise
    from (mu x q_n), where mu is a distribution over length-(n-1) paths.
    A candidate is accepted with min(1, w_n(candidate) / w_n(current));
    rejection mass sits on the diagonal. States are enumerated in row-major
    (C) order of their blocks.
    """
    k = dts.alphabet_size
    size = k**n
    w = _weight_table(dts, n).reshape(size)
    if n == 1:
        cand = dts.proposal_tables[0].astype(float)
    else:
        if mu is None:
            raise ValueError("levels >= 2 need a prefix distribution mu")
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (k,) * (n - 1):
            raise ValueError(f"mu has shape {mu.shape}, expected {(k,) * (n - 1)}")
        if (mu < 0).any() or abs(float(mu.sum()) - 1.0) > 1e-9:
            raise ValueError("mu must be a probability distribution")
        cand = (mu[..., None] * dts.proposal_tables[n - 1]).reshape(size)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = w[None, :] / w[:, None]
    alpha = np.minimum(1.0, np.nan_to_num(ratio, nan=0.0, posinf=np.inf))
    alpha[:, w == 0.0] = 0.0  # zero-weight candidates are always rejected
    alpha[w == 0.0, :] = np.where(w[None, :] > 0.0, 1.0, 0.0)
    kernel = alpha * cand[None, :]
    kernel[np.arange(size), np.arange(size)] += 1.0 - kernel.sum(axis=1)
    return kernel


def invariant_law(dts: DiscreteTargetSequence, n: int, mu: Optional[np.ndarray] = None) -> np.ndarray:
    """Invariant distribution of the level-n kernel for prefix mixture mu.

    For n == 1 this is the normalized level-1 target. For n >= 2 it weights
    each path by the level ratio at its prefix, the prefix mass under mu, and
    the conditional of the level-n target given the prefix, normalized by the
    mu-expectation of the level ratio. With mu equal to the level-(n-1) law it
    reduces to the level-n law.
    """
    exact = enumerate_exact(dts)
    if n == 1:
        return exact.marginals[0].copy()
    if mu is None:
        raise ValueError("levels >= 2 need a prefix distribution mu")
    mu = np.asarray(mu, dtype=float)
    pi_n = exact.marginals[n - 1]
    pref = exact.prefix_marginals[n - 1]
    ratio = exact.level_ratios[n - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pref[..., None] > 0.0, pi_n / np.where(pref[..., None] > 0.0, pref[..., None], 1.0), 0.0)
    weight = ratio * mu
    total = float((weight).sum())
    if total <= 0.0:
        raise ZeroMass("mu puts no mass where the level ratio is positive")
    return (weight[..., None] * cond) / total


def stationarity_residual(dts: DiscreteTargetSequence, n: int, mu: Optional[np.ndarray] = None) -> float:
    """Max-abs residual of law @ kernel - law for the level-n kernel."""
    kernel = build_kernel_matrix(dts, n, mu)
    law = invariant_law(dts, n, mu).reshape(-1)
    return float(np.abs(law @ kernel - law).max())


def identity_check(dts: DiscreteTargetSequence, n: int) -> float:
    """Residual of the normalizing-constant identity at level n.

    Enumerates the mean incremental weight under (previous target x proposal)
    (the proposal alone at level 1) and compares with the exact ratio of
    successive normalizing constants.
    """
    exact = enumerate_exact(dts)
    w = _weight_table(dts, n)
    if n == 1:
        mean_w = float((w * dts.proposal_tables[0]).sum())
        return abs(mean_w - exact.norm_consts[0])
    mix = exact.marginals[n - 2][..., None] * dts.proposal_tables[n - 1]
    finite = np.where(np.isfinite(w), w, 0.0)  # infinite weights carry zero mixture mass
    mean_w = float((finite * mix).sum())
    return abs(mean_w - exact.norm_consts[n - 1] / exact.norm_consts[n - 2])


@dataclass(frozen=True)
class ContractionReport:
    """Total-variation decay of kernel powers toward the invariant law."""

    tv: tuple
    rho_fit: float
    rho_envelope: float
    geometric: bool


def contraction_check(kernel: np.ndarray, law: np.ndarray, max_power: int = 20) -> ContractionReport:
    """Check a geometric envelope on worst-start total variation distance.

    tv[m-1] is the largest TV distance (half L1) between any row of the m-th
    kernel power and the invariant law. rho_envelope is the smallest rho with
    tv[m-1] <= tv[0] * rho**(m-1) for all m; geometric means it is below one.
    rho_fit is the least-squares slope of log tv against m, reported for
    diagnostics only.
    """
    law = np.asarray(law, dtype=float).reshape(-1)
    power = kernel.copy()
    tvs = []
    for _ in range(max_power):
        tvs.append(0.5 * float(np.abs(power - law[None, :]).sum(axis=1).max()))
        power = power @ kernel
    tvs = np.array(tvs)
    tiny = 1e-14
    if tvs[0] <= tiny:
        return ContractionReport(tuple(tvs), 0.0, 0.0, True)
    rho_env = 0.0
    for m in range(1, len(tvs)):
        if tvs[m] > tiny:
            rho_env = max(rho_env, (tvs[m] / tvs[0]) ** (1.0 / m))
    live = tvs > tiny
    if live.sum() >= 2:
        ms = np.arange(1, len(tvs) + 1)[live]
        slope = np.polyfit(ms, np.log(tvs[live]), 1)[0]
        rho_fit = float(math.exp(slope))
    else:
        rho_fit = 0.0
    return ContractionReport(tuple(tvs), rho_fit, rho_env, rho_env < 1.0)


def random_instance(seed: int, max_alphabet: int = 4, max_horizon: int = 3,
                    zero_cells: bool = True) -> DiscreteTargetSequence:
    """A random small instance with nested supports and positive proposals.

    Level-n tables are built by multiplying the level-(n-1) table with a
    positive-or-zero extension factor, so supports only shrink with n and
    every incremental weight is finite. Proposal rows are strictly positive.
    """
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, max_alphabet + 1))
    p = int(rng.integers(2, max_horizon + 1))
    g1 = rng.uniform(0.2, 1.2, size=k)
    if zero_cells and k > 2 and rng.random() < 0.5:
        g1[int(rng.integers(0, k))] = 0.0
    tables = [g1]
    for n in range(2, p + 1):
        factor = rng.uniform(0.2, 1.2, size=(k,) * n)
        if zero_cells and rng.random() < 0.5:
            flat = factor.reshape(-1)
            flat[rng.integers(0, flat.size)] = 0.0
        tables.append(tables[-1][..., None] * factor)
    if not all(t.sum() > 0 for t in tables):
        return random_instance(seed + 7_919, max_alphabet, max_horizon, zero_cells)
    props = []
    for n in range(1, p + 1):
        q = rng.uniform(0.1, 1.0, size=(k,) * n)
        props.append(q / q.sum(axis=-1, keepdims=True))
    return DiscreteTargetSequence(tuple(tables), tuple(props))


def discrete_model(dts: DiscreteTargetSequence):
    """Wrap tabulated targets and proposals for the generic samplers.

    Blocks are plain ints. The proposal tables depend on the whole prefix, so
    the pair selects full-path storage.
    """
    k = dts.alphabet_size
    log_tables = []
    for table in dts.density_tables:
        log_tables.append([math.log(v) if v > 0.0 else NEG_INF for v in table.reshape(-1)])
    log_props = []
    cum_props = []
    for q in dts.proposal_tables:
        flat = q.reshape(-1, k)
        log_props.append([math.log(v) if v > 0.0 else NEG_INF for v in flat.reshape(-1)])
        cum_props.append(np.cumsum(flat, axis=1).tolist())

    def path_index(path):
        idx = 0
        for b in path:
            idx = idx * k + b
        return idx

    def log_density(n, path):
        return log_tables[n - 1][path_index(path)]

    def sample(n, prefix, rng):
        row = cum_props[n - 1][path_index(prefix)] if n > 1 else cum_props[0][0]
        u = rng.random()
        for block, c in enumerate(row):
            if u < c:
                return block
        return k - 1

    def log_prop(n, prefix, block):
        base = path_index(prefix) * k if n > 1 else 0
        return log_props[n - 1][base + block]

    targets = TargetSequence(horizon=dts.horizon, log_density=log_density,
                             block_dim=1, space_label=f"alphabet of size {k}")
    proposals = ProposalFamily(sample=sample, log_density=log_prop)
    return targets, proposals
