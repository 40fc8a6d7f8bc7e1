"""Benchmark state-space models, their proposals, and exact references.

Each model is packaged as a StateSpaceModel: initial/transition/observation
log-densities and samplers plus the observation record with per-index
presence flags. ssm_targets() turns one into the growing sequence of
unnormalized path targets (products of initial, transition and observation
factors, with absent observations contributing factor one), and
prior_proposal() builds the matching bootstrap proposal family whose
incremental weights reduce to the observation likelihood.

Blocks are bare floats for scalar models and flat tuples otherwise; all
densities run in plain scalar arithmetic because the samplers evaluate them
once per proposal. Linear-algebra-heavy references (Kalman recursion,
doubly stochastic mixing matrix) use numpy.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NumericalFailure, OriginBearing
from .targets import NEG_INF, ProposalFamily, TargetSequence

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class StateSpaceModel:
    """One filtering problem: densities, samplers, and the observation record.

    log_transition and sample_transition take the time index of the new
    state (so the first transition is indexed 2). log_observation returns
    0.0 at indexes where observed[n-1] is false.
    """

    block_dim: int
    horizon: int
    log_init: object
    sample_init: object
    log_transition: object
    sample_transition: object
    log_observation: object
    observations: tuple
    observed: tuple
    label: str = ""


def ssm_targets(model: StateSpaceModel) -> TargetSequence:
    """Growing path targets: joint density of states and recorded observations."""
    log_init = model.log_init
    log_trans = model.log_transition
    log_obs = model.log_observation

    def log_density(n, path):
        lp = log_init(path[0]) + log_obs(1, path[0])
        if lp == NEG_INF:
            return NEG_INF
        for m in range(2, n + 1):
            lp += log_trans(m, path[m - 2], path[m - 1]) + log_obs(m, path[m - 1])
            if lp == NEG_INF:
                return NEG_INF
        return lp

    def log_increment(n, prev_block, block):
        lt = log_trans(n, prev_block, block)
        if lt == NEG_INF:
            return NEG_INF
        return lt + log_obs(n, block)

    return TargetSequence(
        horizon=model.horizon,
        log_density=log_density,
        block_dim=model.block_dim,
        space_label=model.label,
        log_increment=log_increment,
    )


def prior_proposal(model: StateSpaceModel) -> ProposalFamily:
    """Bootstrap proposals: draw from the model dynamics, weight by the likelihood."""
    log_obs = model.log_observation

    def sample(n, prefix, rng):
        if n == 1:
            return model.sample_init(rng)
        return model.sample_transition(n, prefix[-1], rng)

    def log_density(n, prefix, block):
        if n == 1:
            return model.log_init(block)
        return model.log_transition(n, prefix[-1], block)

    def log_weight_full(n, prefix, block):
        return log_obs(n, block)

    return ProposalFamily(
        sample=sample,
        log_density=log_density,
        pairwise=True,
        log_weight_full=log_weight_full,
    )


# ---------------------------------------------------------------------------
# linear Gaussian model

@dataclass(frozen=True)
class LinearGaussianSpec:
    """Identity-observed linear Gaussian model with a doubly stochastic mixing matrix."""

    dim: int = 2
    process_noise_std: float = 2.0
    obs_noise_std: float = 0.5
    mixing_seed: int = 7


def transition_matrix(spec: LinearGaussianSpec):
    """Seeded doubly stochastic matrix via alternating row/column normalization."""
    rng = np.random.default_rng(spec.mixing_seed)
    m = 0.5 + rng.random((spec.dim, spec.dim))
    for _ in range(100):
        m /= m.sum(axis=1, keepdims=True)
        m /= m.sum(axis=0, keepdims=True)
        worst = max(np.abs(m.sum(axis=1) - 1.0).max(), np.abs(m.sum(axis=0) - 1.0).max())
        if worst < 1e-12:
            break
    return tuple(tuple(float(v) for v in row) for row in m)


def _iso_log_normal(diff_sq_sum, dim, variance):
    return -0.5 * (dim * (LOG_2PI + math.log(variance)) + diff_sq_sum / variance)


def lg_model(spec: LinearGaussianSpec, observations) -> StateSpaceModel:
    d = spec.dim
    rows = transition_matrix(spec)
    pv = spec.process_noise_std ** 2
    ov = spec.obs_noise_std ** 2
    c_init = -0.5 * d * LOG_2PI
    c_proc = -0.5 * d * (LOG_2PI + math.log(pv))
    c_obs = -0.5 * d * (LOG_2PI + math.log(ov))
    half_pv = 0.5 / pv
    half_ov = 0.5 / ov
    obs = tuple(tuple(float(v) for v in y) for y in observations)
    sigma_v = spec.process_noise_std

    def log_init(x):
        s = 0.0
        for v in x:
            s += v * v
        return c_init - 0.5 * s

    def sample_init(rng):
        return tuple(rng.standard_normal(d).tolist())

    def log_transition(n, prev, cur):
        s = 0.0
        for j in range(d):
            mean_j = 0.0
            row = rows[j]
            for k in range(d):
                mean_j += row[k] * prev[k]
            diff = cur[j] - mean_j
            s += diff * diff
        return c_proc - s * half_pv

    def sample_transition(n, prev, rng):
        noise = rng.standard_normal(d)
        out = []
        for j in range(d):
            mean_j = 0.0
            row = rows[j]
            for k in range(d):
                mean_j += row[k] * prev[k]
            out.append(mean_j + sigma_v * noise[j])
        return tuple(out)

    def log_observation(n, x):
        y = obs[n - 1]
        s = 0.0
        for j in range(d):
            diff = y[j] - x[j]
            s += diff * diff
        return c_obs - s * half_ov

    return StateSpaceModel(
        block_dim=d,
        horizon=len(obs),
        log_init=log_init,
        sample_init=sample_init,
        log_transition=log_transition,
        sample_transition=sample_transition,
        log_observation=log_observation,
        observations=obs,
        observed=(True,) * len(obs),
        label=f"linear-gaussian-d{d}",
    )


def optimal_moments(spec: LinearGaussianSpec, x_prev, y):
    """Posterior mean and per-coordinate variance of one state given its
    predecessor (None for the first step) and its observation."""
    d = spec.dim
    ov = spec.obs_noise_std ** 2
    if x_prev is None:
        prior_mean = (0.0,) * d
        prior_var = 1.0
    else:
        rows = transition_matrix(spec)
        prior_mean = tuple(sum(r[j] * x_prev[j] for j in range(d)) for r in rows)
        prior_var = spec.process_noise_std ** 2
    post_var = prior_var * ov / (prior_var + ov)
    mean = tuple(post_var * (prior_mean[j] / prior_var + y[j] / ov) for j in range(d))
    return mean, post_var


def optimal_proposal_step(spec: LinearGaussianSpec, x_prev, y, rng):
    """One draw from the exact conditional, its log-density, and the
    prefix-only log-weight (the predictive density of the observation)."""
    d = spec.dim
    mean, post_var = optimal_moments(spec, x_prev, y)
    std = math.sqrt(post_var)
    noise = rng.standard_normal(d)
    block = tuple(mean[j] + std * noise[j] for j in range(d))
    s = 0.0
    for j in range(d):
        diff = block[j] - mean[j]
        s += diff * diff
    log_q = _iso_log_normal(s, d, post_var)
    prior_var = 1.0 if x_prev is None else spec.process_noise_std ** 2
    if x_prev is None:
        pm = (0.0,) * d
    else:
        rows = transition_matrix(spec)
        pm = tuple(sum(r[j] * x_prev[j] for j in range(d)) for r in rows)
    pred_var = prior_var + spec.obs_noise_std ** 2
    s = 0.0
    for j in range(d):
        diff = y[j] - pm[j]
        s += diff * diff
    log_w = _iso_log_normal(s, d, pred_var)
    return block, log_q, log_w


def lg_optimal_proposal(spec: LinearGaussianSpec, observations) -> ProposalFamily:
    """Exact one-step conditional proposals; weights depend only on the prefix."""
    d = spec.dim
    rows = transition_matrix(spec)
    pv = spec.process_noise_std ** 2
    ov = spec.obs_noise_std ** 2
    obs = tuple(tuple(float(v) for v in y) for y in observations)

    post_var_1 = ov / (1.0 + ov)
    post_std_1 = math.sqrt(post_var_1)
    c_q1 = -0.5 * d * (LOG_2PI + math.log(post_var_1))
    half_q1 = 0.5 / post_var_1
    post_var = pv * ov / (pv + ov)
    post_std = math.sqrt(post_var)
    c_q = -0.5 * d * (LOG_2PI + math.log(post_var))
    half_q = 0.5 / post_var

    pred_var_1 = 1.0 + ov
    c_w1 = -0.5 * d * (LOG_2PI + math.log(pred_var_1))
    half_w1 = 0.5 / pred_var_1
    pred_var = pv + ov
    c_w = -0.5 * d * (LOG_2PI + math.log(pred_var))
    half_w = 0.5 / pred_var

    def _mean(n, prefix):
        y = obs[n - 1]
        if n == 1:
            return tuple(post_var_1 * yj / ov for yj in y)
        prev = prefix[-1]
        out = []
        for j in range(d):
            mj = 0.0
            row = rows[j]
            for k in range(d):
                mj += row[k] * prev[k]
            out.append(post_var * (mj / pv + y[j] / ov))
        return tuple(out)

    def sample(n, prefix, rng):
        mean = _mean(n, prefix)
        std = post_std_1 if n == 1 else post_std
        noise = rng.standard_normal(d)
        return tuple(mean[j] + std * noise[j] for j in range(d))

    def log_density(n, prefix, block):
        mean = _mean(n, prefix)
        s = 0.0
        for j in range(d):
            diff = block[j] - mean[j]
            s += diff * diff
        if n == 1:
            return c_q1 - s * half_q1
        return c_q - s * half_q

    def log_weight_prefix(n, prefix):
        y = obs[n - 1]
        if n == 1:
            s = 0.0
            for yj in y:
                s += yj * yj
            return c_w1 - s * half_w1
        prev = prefix[-1]
        s = 0.0
        for j in range(d):
            mj = 0.0
            row = rows[j]
            for k in range(d):
                mj += row[k] * prev[k]
            diff = y[j] - mj
            s += diff * diff
        return c_w - s * half_w

    def log_weight_full(n, prefix, block):
        return log_weight_prefix(n, prefix)

    return ProposalFamily(
        sample=sample,
        log_density=log_density,
        pairwise=True,
        weight_independent_of_last=True,
        log_weight_prefix=log_weight_prefix,
        log_weight_full=log_weight_full,
    )


def kalman_filter(spec: LinearGaussianSpec, observations, matrix=None):
    """Exact filter: per-step posterior means and cumulative log-likelihoods.

    matrix overrides the spec's seeded mixing matrix (same shape), for
    pinning a hand-chosen transition in comparisons.
    """
    d = spec.dim
    a = np.array(transition_matrix(spec) if matrix is None else matrix, dtype=float)
    pv = spec.process_noise_std ** 2
    ov = spec.obs_noise_std ** 2
    eye = np.eye(d)
    mean = np.zeros(d)
    cov = eye.copy()
    means, logliks = [], []
    ll = 0.0
    for n, y in enumerate(observations, start=1):
        y = np.asarray(y, dtype=float)
        if n > 1:
            mean = a @ mean
            cov = a @ cov @ a.T + pv * eye
        innov_cov = cov + ov * eye
        try:
            chol = np.linalg.cholesky(innov_cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"innovation covariance not positive definite at step {n}") from exc
        resid = y - mean
        z = np.linalg.solve(chol, resid)
        ll += -0.5 * (d * LOG_2PI + float(z @ z)) - float(np.log(np.diag(chol)).sum())
        gain = cov @ np.linalg.solve(innov_cov, eye)
        mean = mean + gain @ resid
        cov = (eye - gain) @ cov
        means.append(tuple(float(v) for v in mean))
        logliks.append(ll)
    if not math.isfinite(ll):
        raise NumericalFailure("log-likelihood not finite")
    return means, logliks


def kalman_log_likelihood(spec: LinearGaussianSpec, observations) -> float:
    return kalman_filter(spec, observations)[1][-1]


# ---------------------------------------------------------------------------
# scalar nonlinear model

@dataclass(frozen=True)
class KitagawaSpec:
    """Scalar model with oscillating drift and squared observations."""

    process_noise_var: float = 5.0
    obs_noise_var: float = 1.0
    init_var: float = 5.0


def kitagawa_transition_mean(x_prev: float, n: int) -> float:
    """Drift toward the next state at time index n."""
    return 0.5 * x_prev + 25.0 * x_prev / (1.0 + x_prev * x_prev) + 8.0 * math.cos(1.2 * n)


def kitagawa_model(spec: KitagawaSpec, observations) -> StateSpaceModel:
    pv = spec.process_noise_var
    ov = spec.obs_noise_var
    iv = spec.init_var
    c_init = -0.5 * (LOG_2PI + math.log(iv))
    half_iv = 0.5 / iv
    c_proc = -0.5 * (LOG_2PI + math.log(pv))
    half_pv = 0.5 / pv
    c_obs = -0.5 * (LOG_2PI + math.log(ov))
    half_ov = 0.5 / ov
    p_std = math.sqrt(pv)
    i_std = math.sqrt(iv)
    obs = tuple(float(y) for y in observations)
    cos = math.cos

    def log_init(x):
        return c_init - x * x * half_iv

    def sample_init(rng):
        return i_std * rng.standard_normal()

    def log_transition(n, prev, cur):
        mean = 0.5 * prev + 25.0 * prev / (1.0 + prev * prev) + 8.0 * cos(1.2 * n)
        diff = cur - mean
        return c_proc - diff * diff * half_pv

    def sample_transition(n, prev, rng):
        mean = 0.5 * prev + 25.0 * prev / (1.0 + prev * prev) + 8.0 * cos(1.2 * n)
        return mean + p_std * rng.standard_normal()

    def log_observation(n, x):
        diff = obs[n - 1] - x * x * 0.05
        return c_obs - diff * diff * half_ov

    return StateSpaceModel(
        block_dim=1,
        horizon=len(obs),
        log_init=log_init,
        sample_init=sample_init,
        log_transition=log_transition,
        sample_transition=sample_transition,
        log_observation=log_observation,
        observations=obs,
        observed=(True,) * len(obs),
        label="kitagawa",
    )


# ---------------------------------------------------------------------------
# bearings-only tracking

@dataclass(frozen=True)
class TrackingSpec:
    """Planar constant-velocity target observed through noisy bearings.

    State layout: (horizontal position, horizontal velocity, vertical
    position, vertical velocity). Observations arrive surely every
    grid_period steps and with probability offgrid_prob otherwise. The
    initial distribution is a diagonal Gaussian placed away from the origin,
    where the bearing is undefined.
    """

    time_step: float = 1.0
    process_scale: float = 5.0
    bearing_noise_var: float = 1e-2
    grid_period: int = 4
    offgrid_prob: float = 0.25
    init_mean: tuple = (3.0, 0.5, 3.0, 0.5)
    init_std: tuple = (1.0, 0.5, 1.0, 0.5)


def bearing(state) -> float:
    """Angle of the position vector, resolved over all four quadrants."""
    if state[0] == 0.0 and state[2] == 0.0:
        raise OriginBearing("bearing undefined at the origin")
    return math.atan2(state[2], state[0])


def bearing_log_likelihood(state, y: float, noise_var: float = 1e-2) -> float:
    """Gaussian density of an observed bearing, residual wrapped to (-pi, pi]."""
    diff = y - bearing(state)
    diff = (diff + math.pi) % (2.0 * math.pi) - math.pi
    return -0.5 * (LOG_2PI + math.log(noise_var)) - 0.5 * diff * diff / noise_var


class _GapKernel:
    """Transition over m consecutive steps, per (position, velocity) pair.

    Linear map ((1, m*T), (0, 1)) with accumulated noise covariance
    sum_j F^j S F^j' for the one-step noise block S.
    """

    __slots__ = ("shift", "chol", "inv_a", "inv_b", "inv_c", "log_norm")

    def __init__(self, spec, m):
        t = spec.time_step
        s = spec.process_scale
        a0, b0, c0 = s * t ** 3 / 3.0, s * t ** 2 / 2.0, s * t
        a = b = c = 0.0
        for j in range(m):
            jt = j * t
            a += a0 + 2.0 * jt * b0 + jt * jt * c0
            b += b0 + jt * c0
            c += c0
        self.shift = m * t
        det = a * c - b * b
        l11 = math.sqrt(a)
        l21 = b / l11
        self.chol = (l11, l21, math.sqrt(c - l21 * l21))
        self.inv_a = c / det
        self.inv_b = -b / det
        self.inv_c = a / det
        self.log_norm = -(LOG_2PI + 0.5 * math.log(det))

    def log_density(self, mp, mv, p, v):
        dp = p - mp
        dv = v - mv
        return self.log_norm - 0.5 * (self.inv_a * dp * dp + 2.0 * self.inv_b * dp * dv + self.inv_c * dv * dv)

    def sample_pair(self, mp, mv, z1, z2):
        l11, l21, l22 = self.chol
        return mp + l11 * z1, mv + l21 * z1 + l22 * z2


def _gap_kernels(spec):
    cache = {}

    def get(m):
        kern = cache.get(m)
        if kern is None:
            kern = cache[m] = _GapKernel(spec, m)
        return kern

    return get


def predict_mean(spec: TrackingSpec, state, m: int):
    """Mean state m steps ahead under the noise-free dynamics."""
    shift = m * spec.time_step
    return (state[0] + shift * state[1], state[1],
            state[2] + shift * state[3], state[3])


def _diag_gaussian(mean, std):
    logc = sum(-0.5 * (LOG_2PI + 2.0 * math.log(s)) for s in std)

    def log_density(x):
        s = logc
        for j in range(len(mean)):
            z = (x[j] - mean[j]) / std[j]
            s -= 0.5 * z * z
        return s

    def sample(rng):
        noise = rng.standard_normal(len(mean))
        return tuple(mean[j] + std[j] * noise[j] for j in range(len(mean)))

    return log_density, sample


def tracking_model(spec: TrackingSpec, observations, observed) -> StateSpaceModel:
    """Per-step tracking model; observations is a full-length sequence with
    None at indexes where observed is false."""
    gap = _gap_kernels(spec)
    step = gap(1)
    bvar = spec.bearing_noise_var
    obs = tuple(None if y is None else float(y) for y in observations)
    flags = tuple(bool(f) for f in observed)
    if len(obs) != len(flags):
        raise LengthMismatch("observations and presence flags differ in length")
    log_init, sample_init = _diag_gaussian(spec.init_mean, spec.init_std)

    def log_transition(n, prev, cur):
        lp = step.log_density(prev[0] + step.shift * prev[1], prev[1], cur[0], cur[1])
        return lp + step.log_density(prev[2] + step.shift * prev[3], prev[3], cur[2], cur[3])

    def sample_transition(n, prev, rng):
        z = rng.standard_normal(4)
        p1, v1 = step.sample_pair(prev[0] + step.shift * prev[1], prev[1], z[0], z[1])
        p2, v2 = step.sample_pair(prev[2] + step.shift * prev[3], prev[3], z[2], z[3])
        return (p1, v1, p2, v2)

    def log_observation(n, x):
        if not flags[n - 1]:
            return 0.0
        return bearing_log_likelihood(x, obs[n - 1], bvar)

    return StateSpaceModel(
        block_dim=4,
        horizon=len(obs),
        log_init=log_init,
        sample_init=sample_init,
        log_transition=log_transition,
        sample_transition=sample_transition,
        log_observation=log_observation,
        observations=obs,
        observed=flags,
        label="tracking",
    )


def tracking_arrival_model(spec: TrackingSpec, observations, observed):
    """Tracking model indexed by observation arrivals only.

    Level k lives on the state at the k-th arrival time; transitions compose
    the skipped steps exactly (linear Gaussian marginalization), so the
    arrival-indexed posteriors equal the corresponding full-sequence
    posteriors. Suits frontier accrual between arrivals. Returns the model
    and the tuple of arrival time indexes.
    """
    arrivals = tuple(i + 1 for i, f in enumerate(observed) if f)
    if not arrivals:
        raise ValueError("no observation arrivals")
    gap = _gap_kernels(spec)
    bvar = spec.bearing_noise_var
    obs = tuple(float(observations[a - 1]) for a in arrivals)

    lead = arrivals[0] - 1
    mean0 = predict_mean(spec, spec.init_mean, lead)
    sp1, sv1, sp2, sv2 = spec.init_std
    if lead:
        k = gap(lead)
        shift = k.shift
        l11, l21, l22 = k.chol
    covs = []
    for sp, sv in ((sp1, sv1), (sp2, sv2)):
        if lead:
            a = sp * sp + shift * shift * sv * sv + l11 * l11
            b = shift * sv * sv + l21 * l11
            c = sv * sv + l21 * l21 + l22 * l22
        else:
            a, b, c = sp * sp, 0.0, sv * sv
        covs.append((a, b, c))

    def _pair_chol(a, b, c):
        l1 = math.sqrt(a)
        l2 = b / l1
        return l1, l2, math.sqrt(c - l2 * l2)

    chols = [_pair_chol(*cv) for cv in covs]
    init_norms, init_invs = [], []
    for a, b, c in covs:
        det = a * c - b * b
        init_norms.append(-(LOG_2PI + 0.5 * math.log(det)))
        init_invs.append((c / det, -b / det, a / det))

    def log_init(x):
        lp = 0.0
        for pair, (ia, ib, ic), norm in zip(((0, 1), (2, 3)), init_invs, init_norms):
            dp = x[pair[0]] - mean0[pair[0]]
            dv = x[pair[1]] - mean0[pair[1]]
            lp += norm - 0.5 * (ia * dp * dp + 2.0 * ib * dp * dv + ic * dv * dv)
        return lp

    def sample_init(rng):
        z = rng.standard_normal(4)
        out = []
        for i, pair in enumerate(((0, 1), (2, 3))):
            l1, l2, l3 = chols[i]
            out.append(mean0[pair[0]] + l1 * z[2 * i])
            out.append(mean0[pair[1]] + l2 * z[2 * i] + l3 * z[2 * i + 1])
        return tuple(out)

    def log_transition(k, prev, cur):
        kern = gap(arrivals[k - 1] - arrivals[k - 2])
        shift = kern.shift
        lp = kern.log_density(prev[0] + shift * prev[1], prev[1], cur[0], cur[1])
        return lp + kern.log_density(prev[2] + shift * prev[3], prev[3], cur[2], cur[3])

    def sample_transition(k, prev, rng):
        kern = gap(arrivals[k - 1] - arrivals[k - 2])
        shift = kern.shift
        z = rng.standard_normal(4)
        p1, v1 = kern.sample_pair(prev[0] + shift * prev[1], prev[1], z[0], z[1])
        p2, v2 = kern.sample_pair(prev[2] + shift * prev[3], prev[3], z[2], z[3])
        return (p1, v1, p2, v2)

    def log_observation(k, x):
        return bearing_log_likelihood(x, obs[k - 1], bvar)

    model = StateSpaceModel(
        block_dim=4,
        horizon=len(arrivals),
        log_init=log_init,
        sample_init=sample_init,
        log_transition=log_transition,
        sample_transition=sample_transition,
        log_observation=log_observation,
        observations=obs,
        observed=(True,) * len(arrivals),
        label="tracking-arrivals",
    )
    return model, arrivals


# ---------------------------------------------------------------------------
# simulation and dataset files

@dataclass(frozen=True)
class Dataset:
    """One simulated realization plus everything needed to recreate it."""

    model: str
    params: dict
    seed: int
    horizon: int
    states: list
    observations: list
    observed: list


_SPEC_CLASSES = {
    "linear-gaussian": LinearGaussianSpec,
    "kitagawa": KitagawaSpec,
    "tracking": TrackingSpec,
}


def dataset_spec(ds: Dataset):
    cls = _SPEC_CLASSES[ds.model]
    params = dict(ds.params)
    for field in dataclasses.fields(cls):
        if field.name in params and isinstance(params[field.name], list):
            params[field.name] = tuple(params[field.name])
    return cls(**params)


def simulate(model: str, spec, horizon: int, seed: int) -> Dataset:
    """Draw one trajectory and observation record from a model."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    if model == "linear-gaussian":
        d = spec.dim
        rows = transition_matrix(spec)
        x = tuple(rng.standard_normal(d).tolist())
        states, observations = [], []
        for n in range(1, horizon + 1):
            if n > 1:
                noise = rng.standard_normal(d)
                x = tuple(sum(rows[j][k] * x[k] for k in range(d)) + spec.process_noise_std * noise[j]
                          for j in range(d))
            states.append(x)
            w = rng.standard_normal(d)
            observations.append(tuple(x[j] + spec.obs_noise_std * w[j] for j in range(d)))
        flags = [True] * horizon
    elif model == "kitagawa":
        x = math.sqrt(spec.init_var) * rng.standard_normal()
        states, observations = [], []
        for n in range(1, horizon + 1):
            if n > 1:
                x = kitagawa_transition_mean(x, n) + math.sqrt(spec.process_noise_var) * rng.standard_normal()
            states.append(x)
            observations.append(x * x / 20.0 + math.sqrt(spec.obs_noise_var) * rng.standard_normal())
        flags = [True] * horizon
    elif model == "tracking":
        gap = _gap_kernels(spec)
        step = gap(1)
        noise_std = math.sqrt(spec.bearing_noise_var)
        z = rng.standard_normal(4)
        x = tuple(spec.init_mean[j] + spec.init_std[j] * z[j] for j in range(4))
        states, observations, flags = [], [], []
        for n in range(1, horizon + 1):
            if n > 1:
                z = rng.standard_normal(4)
                p1, v1 = step.sample_pair(x[0] + step.shift * x[1], x[1], z[0], z[1])
                p2, v2 = step.sample_pair(x[2] + step.shift * x[3], x[3], z[2], z[3])
                x = (p1, v1, p2, v2)
            states.append(x)
            if n % spec.grid_period == 0:
                seen = True
            else:
                seen = rng.random() < spec.offgrid_prob
            flags.append(seen)
            observations.append(bearing(x) + noise_std * rng.standard_normal() if seen else None)
    else:
        raise ValueError(f"unknown model {model!r}")
    return Dataset(
        model=model,
        params=dataclasses.asdict(spec),
        seed=int(seed),
        horizon=horizon,
        states=states,
        observations=observations,
        observed=flags,
    )


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


def dataset_to_json(ds: Dataset) -> dict:
    return {
        "format": "simcmc-dataset",
        "version": 1,
        "model": ds.model,
        "params": {k: _listify(v) for k, v in ds.params.items()},
        "seed": ds.seed,
        "horizon": ds.horizon,
        "states": [_listify(s) for s in ds.states],
        "observations": [_listify(y) for y in ds.observations],
        "observed": list(ds.observed),
    }


def dataset_from_json(payload: dict) -> Dataset:
    if payload.get("format") != "simcmc-dataset":
        raise ValueError("not a dataset file")
    vector = payload["model"] != "kitagawa"

    def fix(v):
        return tuple(v) if vector and isinstance(v, list) else v

    return Dataset(
        model=payload["model"],
        params=payload["params"],
        seed=payload["seed"],
        horizon=payload["horizon"],
        states=[fix(s) for s in payload["states"]],
        observations=[fix(y) for y in payload["observations"]],
        observed=[bool(f) for f in payload["observed"]],
    )


def save_dataset(ds: Dataset, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_json(ds), fh, indent=1)


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        return dataset_from_json(json.load(fh))
