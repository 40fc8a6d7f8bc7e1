"""Experiment harness: seeded replications of the samplers over the benchmark
models, RMSE aggregation against exact or large-run references, and
deterministic report files (JSON plus an aligned text table).

Comparisons follow an equal-budget convention: an interacting-chain run uses
as many updates per level as the particle filter has particles, spent in the
staged level-major order since the whole record is available up front.
Tracking experiments measure a real-time protocol where each time unit grants
a fixed number of chain updates, all spent at the frontier level.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import engine, models, smc
from .errors import LengthMismatch

CODE_VERSION = "0.1.0"

_ALGORITHMS = ("simcmc", "simcmc-parallel", "smc")
_PROPOSALS = ("prior", "optimal")
_MODELS = ("linear-gaussian", "kitagawa", "tracking")
_TRACKING_ARMS = ("smc", "smc-grid", "simcmc")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, serializable bit-exactly."""

    name: str
    model: str
    params: dict = field(default_factory=dict)
    algorithms: tuple = ("simcmc",)
    proposal: str = "prior"
    sample_counts: tuple = (1000,)
    replications: int = 20
    seed: int = 0
    burn_in: int = 0
    horizon: int = 100
    dataset_seed: int = 1
    output: str = ""
    reference_count: int = 0
    budget_per_unit: int = 0
    frontier_lag: int = 1
    arms: tuple = ()
    checks: tuple = ()

    def spec(self):
        cls = models._SPEC_CLASSES[self.model]
        params = dict(self.params)
        for f in dataclasses.fields(cls):
            if f.name in params and isinstance(params[f.name], list):
                params[f.name] = tuple(params[f.name])
        return cls(**params)


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ValueError naming each offending field."""
    problems = []
    if not cfg.name:
        problems.append("name: empty")
    if cfg.model not in _MODELS:
        problems.append(f"model: {cfg.model!r} not one of {_MODELS}")
    if cfg.proposal not in _PROPOSALS:
        problems.append(f"proposal: {cfg.proposal!r} not one of {_PROPOSALS}")
    if cfg.proposal == "optimal" and cfg.model != "linear-gaussian":
        problems.append("proposal: optimal proposal exists only for the linear-gaussian model")
    for alg in cfg.algorithms:
        if alg not in _ALGORITHMS:
            problems.append(f"algorithms: {alg!r} not one of {_ALGORITHMS}")
    if any(n < 1 for n in cfg.sample_counts):
        problems.append("sample_counts: all counts must be positive")
    if cfg.replications < 1:
        problems.append("replications: must be positive")
    if cfg.burn_in < 0:
        problems.append("burn_in: must be nonnegative")
    if cfg.horizon < 1:
        problems.append("horizon: must be positive")
    if cfg.reference_count < 0:
        problems.append("reference_count: must be nonnegative")
    if cfg.model == "kitagawa" and cfg.reference_count < 1:
        problems.append("reference_count: kitagawa has no closed-form truth, need a large-run reference")
    if cfg.model == "tracking":
        if cfg.budget_per_unit < 1:
            problems.append("budget_per_unit: must be positive for tracking")
        if cfg.frontier_lag < 1:
            problems.append("frontier_lag: must be positive")
        for arm in cfg.arms or ():
            if arm not in _TRACKING_ARMS:
                problems.append(f"arms: {arm!r} not one of {_TRACKING_ARMS}")
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))


def config_to_json(cfg: ExperimentConfig) -> dict:
    payload = dataclasses.asdict(cfg)
    for key in ("algorithms", "sample_counts", "arms", "checks"):
        payload[key] = list(payload[key])
    payload["checks"] = [dict(c) for c in cfg.checks]
    payload["format"] = "simcmc-config"
    return payload


def config_from_json(payload: dict) -> ExperimentConfig:
    data = {k: v for k, v in payload.items() if k != "format"}
    for key in ("algorithms", "sample_counts", "arms"):
        if key in data:
            data[key] = tuple(data[key])
    if "checks" in data:
        data["checks"] = tuple(dict(c) for c in data["checks"])
    return ExperimentConfig(**data)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        cfg = config_from_json(json.load(fh))
    validate_config(cfg)
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(config_to_json(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def output_dir(cfg: ExperimentConfig = None) -> str:
    if cfg is not None and cfg.output:
        return cfg.output
    return os.environ.get("SIMCMC_OUTPUT_DIR", ".")


@dataclass
class RunReport:
    name: str
    config_hash: str
    code_version: str
    model: str
    truth: dict
    results: dict
    tracking: dict
    timing: dict
    checks: list


def report_to_json(report: RunReport) -> dict:
    payload = dataclasses.asdict(report)
    payload["format"] = "simcmc-report"
    return payload


def report_equal_modulo_timing(a: dict, b: dict) -> bool:
    a = {k: v for k, v in a.items() if k != "timing"}
    b = {k: v for k, v in b.items() if k != "timing"}
    return json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def rmse(estimates, truths) -> float:
    """Root mean squared deviation; a scalar truth broadcasts."""
    estimates = list(estimates)
    if not estimates:
        raise LengthMismatch("no estimates")
    if isinstance(truths, (int, float)):
        truths = [float(truths)] * len(estimates)
    else:
        truths = list(truths)
    if len(estimates) != len(truths):
        raise LengthMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    total = 0.0
    for e, t in zip(estimates, truths):
        diff = e - t
        total += diff * diff
    return math.sqrt(total / len(estimates))


def state_rmse(estimates, truths) -> float:
    """RMSE over time steps and state components of vector estimates."""
    if len(estimates) != len(truths):
        raise LengthMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    total = 0.0
    count = 0
    for e, t in zip(estimates, truths):
        for ej, tj in zip(e, t):
            diff = ej - tj
            total += diff * diff
            count += 1
    return math.sqrt(total / count)


def sign_test(better, worse):
    """Paired one-sided sign test that `better` beats `worse`.

    Returns (wins, ties, p_value) where the p-value is the binomial tail
    probability of at least that many wins under a fair coin, ties dropped.
    """
    if len(better) != len(worse):
        raise LengthMismatch("paired samples differ in length")
    wins = ties = 0
    for a, b in zip(better, worse):
        if a < b:
            wins += 1
        elif a == b:
            ties += 1
    n = len(better) - ties
    if n == 0:
        return wins, ties, 1.0
    tail = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0 ** n
    return wins, ties, tail


def child_seed(root: int, *key) -> int:
    """Deterministic 64-bit seed for one replication arm."""
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def prior_path(model: models.StateSpaceModel, seed: int):
    """One full-horizon draw from the model dynamics, for nested initialization."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=int(seed), spawn_key=(0, 9))))
    blocks = [model.sample_init(rng)]
    for n in range(2, model.horizon + 1):
        blocks.append(model.sample_transition(n, blocks[-1], rng))
    return tuple(blocks)


def _proposal_for(cfg, model_obj, spec):
    if cfg.proposal == "optimal":
        return models.lg_optimal_proposal(spec, model_obj.observations)
    return models.prior_proposal(model_obj)


def simcmc_log_likelihood(targets, proposals, model_obj, iterations, seed,
                          burn_in=0, mode="sequential"):
    """One chained normalizing-constant estimate after `iterations` updates per level.

    Sequential chains use the staged traversal: the whole observation record
    is in hand, so each level finishes its updates before the next starts,
    which is the tighter order for a fixed budget. Matched-cost comparisons
    hold because the total update count equals that of `iterations`
    interleaved sweeps. Lagged chains model concurrent per-level workers, so
    they keep the sweep order that definition requires.
    """
    path = prior_path(model_obj, seed)
    state = engine.init(targets, proposals, engine.nested_paths(path),
                        burn_in=burn_in, seed=seed, mode=mode)
    if state.lagged:
        for _ in range(iterations):
            engine.sweep(state)
    else:
        engine.staged(state, iterations)
    est = engine.norm_const_estimates(state)
    return est.log_chained[-1], state


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    """R seeded replications of every (algorithm, sample count) cell."""
    validate_config(cfg)
    if cfg.model == "tracking":
        return tracking_comparison(cfg, write=write)
    spec = cfg.spec()
    dataset = models.simulate(cfg.model, spec, cfg.horizon, cfg.dataset_seed)
    if cfg.model == "linear-gaussian":
        model_obj = models.lg_model(spec, dataset.observations)
    else:
        model_obj = models.kitagawa_model(spec, dataset.observations)
    targets = models.ssm_targets(model_obj)

    if cfg.model == "linear-gaussian":
        truth_ll = models.kalman_log_likelihood(spec, dataset.observations)
        truth = {"kind": "kalman", "log_likelihood": truth_ll, "reference_count": None}
    else:
        ref_pop = smc.smc_run(targets, models.prior_proposal(model_obj),
                              cfg.reference_count, seed=child_seed(cfg.seed, 97))
        truth_ll = ref_pop.log_likelihood
        truth = {"kind": "smc-reference", "log_likelihood": truth_ll,
                 "reference_count": cfg.reference_count}

    results = {}
    timing = {}
    for ai, alg in enumerate(cfg.algorithms):
        per_n = {}
        for ni, n in enumerate(cfg.sample_counts):
            start = time.perf_counter()
            estimates = []
            accept_sum = None
            for rep in range(cfg.replications):
                seed = child_seed(cfg.seed, ai, ni, rep)
                if alg == "smc":
                    pop = smc.smc_run(targets, _proposal_for(cfg, model_obj, spec), n, seed=seed)
                    estimates.append(pop.log_likelihood)
                else:
                    mode = "parallel-lagged" if alg == "simcmc-parallel" else "sequential"
                    ll, state = simcmc_log_likelihood(
                        targets, _proposal_for(cfg, model_obj, spec), model_obj,
                        n, seed, burn_in=cfg.burn_in, mode=mode)
                    estimates.append(ll)
                    rates = engine.acceptance_rates(state)
                    if accept_sum is None:
                        accept_sum = [0.0] * len(rates)
                    for j, r in enumerate(rates):
                        accept_sum[j] += r
            cell = {"rmse": rmse(estimates, truth_ll), "estimates": estimates}
            if accept_sum is not None:
                cell["acceptance_mean"] = [s / cfg.replications for s in accept_sum]
            per_n[str(n)] = cell
            timing[f"{alg}:{n}"] = time.perf_counter() - start
        results[alg] = per_n

    report = RunReport(
        name=cfg.name,
        config_hash=config_hash(cfg),
        code_version=CODE_VERSION,
        model=cfg.model,
        truth=truth,
        results=results,
        tracking={},
        timing=timing,
        checks=evaluate_checks(cfg, results, {}),
    )
    if write:
        write_report(cfg, report)
    return report


def reservoir_mean(state, level: int, dim: int):
    """Componentwise burn-in-windowed reservoir average at one level."""
    return tuple(
        engine.empirical_expectation(state, level, lambda b, j=j: b[j])
        for j in range(dim)
    )


def tracking_adaptive_run(spec, dataset, budget_per_unit: int, seed: int,
                          lag: int = 1, seed_draws: int = 1):
    """Real-time frontier accrual: per time unit, spend the update budget on
    the newest levels and report the current-state estimate available then.

    Levels index observation arrivals; between arrivals the estimate is the
    noise-free prediction from the newest reservoir mean. When a level opens,
    seed_draws candidate seeds are drawn and one kept by weight-proportional
    resampling, charged against that unit's budget. Returns one state
    estimate per time step.
    """
    model_obj, arrivals = models.tracking_arrival_model(spec, dataset.observations, dataset.observed)
    targets = models.ssm_targets(model_obj)
    proposals = models.prior_proposal(model_obj)
    estimates = []
    state = None
    level = 0
    last_arrival = None
    for n in range(1, dataset.horizon + 1):
        spent = 0
        if level < len(arrivals) and arrivals[level] == n:
            level += 1
            if state is None:
                rng = np.random.Generator(np.random.Philox(
                    np.random.SeedSequence(entropy=int(seed), spawn_key=(0, 9))))
                cands = [model_obj.sample_init(rng) for _ in range(max(seed_draws, 1))]
                lws = np.array([proposals.log_weight_full(1, (), b) for b in cands])
                probs = np.exp(lws - lws.max())
                pick = int(rng.choice(len(cands), p=probs / probs.sum()))
                state = engine.init(targets, proposals, [(cands[pick],)], seed=seed)
            else:
                engine.extend_frontier(state, seed_draws=seed_draws)
            spent = max(seed_draws, 1)
            last_arrival = n
        if state is not None:
            lo = max(1, level - lag + 1)
            rounds = max(1, (budget_per_unit - spent) // (level - lo + 1))
            engine.accrue(state, (lo, level), updates=rounds)
            mean = reservoir_mean(state, level, 4)
            estimates.append(models.predict_mean(spec, mean, n - last_arrival))
        else:
            estimates.append(models.predict_mean(spec, spec.init_mean, n - 1))
    return estimates


def tracking_comparison(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    """Equal-budget tracking arms: per-step filters vs frontier accrual."""
    validate_config(cfg)
    spec = cfg.spec()
    arms = cfg.arms or _TRACKING_ARMS
    budget = cfg.budget_per_unit
    per_arm = {arm: [] for arm in arms}
    mean_state = {"mean": lambda b: b}

    start = time.perf_counter()
    for rep in range(cfg.replications):
        dataset = models.simulate("tracking", spec, cfg.horizon,
                                  child_seed(cfg.dataset_seed, rep))
        for arm in arms:
            seed = child_seed(cfg.seed, rep, arms.index(arm))
            if arm == "smc":
                model_obj = models.tracking_model(spec, dataset.observations, dataset.observed)
                pop = smc.smc_run(models.ssm_targets(model_obj),
                                  models.prior_proposal(model_obj),
                                  budget, seed=seed, per_step=mean_state)
                estimates = pop.tracked["mean"]
            elif arm == "smc-grid":
                grid_flags = [(i + 1) % spec.grid_period == 0 for i in range(dataset.horizon)]
                grid_obs = [y if keep else None
                            for y, keep in zip(dataset.observations, grid_flags)]
                model_obj = models.tracking_model(spec, grid_obs, grid_flags)
                pop = smc.smc_run(models.ssm_targets(model_obj),
                                  models.prior_proposal(model_obj),
                                  budget * spec.grid_period, seed=seed, per_step=mean_state)
                estimates = pop.tracked["mean"]
            else:
                estimates = tracking_adaptive_run(spec, dataset, budget, seed,
                                                  lag=cfg.frontier_lag)
            per_arm[arm].append(state_rmse(estimates, dataset.states))

    tracking = {}
    for arm in arms:
        values = per_arm[arm]
        tracking[arm] = {
            "average_rmse": sum(values) / len(values),
            "per_realization": values,
        }
    if "simcmc" in arms and "smc" in arms:
        wins, ties, p = sign_test(per_arm["simcmc"], per_arm["smc"])
        tracking["comparison"] = {"better": "simcmc", "worse": "smc",
                                  "wins": wins, "ties": ties, "p_value": p}

    report = RunReport(
        name=cfg.name,
        config_hash=config_hash(cfg),
        code_version=CODE_VERSION,
        model=cfg.model,
        truth={"kind": "simulated-states", "log_likelihood": None, "reference_count": None},
        results={},
        tracking=tracking,
        timing={"tracking": time.perf_counter() - start},
        checks=evaluate_checks(cfg, {}, tracking),
    )
    if write:
        write_report(cfg, report)
    return report


def evaluate_checks(cfg: ExperimentConfig, results: dict, tracking: dict) -> list:
    """Declarative pass/fail assertions carried by the config."""
    outcomes = []
    for check in cfg.checks:
        kind = check["type"]
        if kind == "rmse_max":
            value = results[check["arm"]][str(check["count"])]["rmse"]
            passed = value <= check["max"]
            desc = f"{check['arm']} rmse at {check['count']} is {value:.4f} <= {check['max']}"
        elif kind == "rmse_decreasing":
            cells = results[check["arm"]]
            counts = sorted((int(k) for k in cells), key=int)
            first, last = cells[str(counts[0])]["rmse"], cells[str(counts[-1])]["rmse"]
            passed = last < first
            desc = f"{check['arm']} rmse falls from {first:.4f} at {counts[0]} to {last:.4f} at {counts[-1]}"
        elif kind == "rmse_range":
            value = results[check["arm"]][str(check["count"])]["rmse"]
            passed = check["low"] <= value <= check["high"]
            desc = f"{check['arm']} rmse at {check['count']} is {value:.4f} in [{check['low']}, {check['high']}]"
        elif kind == "ordering":
            wins, ties, p = sign_test(tracking[check["better"]]["per_realization"],
                                      tracking[check["worse"]]["per_realization"])
            passed = p < check.get("level", 0.05)
            desc = (f"{check['better']} beats {check['worse']} in {wins} of "
                    f"{len(tracking[check['better']]['per_realization']) - ties} pairs (p={p:.4f})")
        else:
            passed = False
            desc = f"unknown check type {kind!r}"
        outcomes.append({"description": desc, "passed": bool(passed)})
    return outcomes


def render_table(report: RunReport) -> str:
    """Aligned text table, one row per arm, one column per sample count."""
    lines = [f"experiment: {report.name}", f"model: {report.model}"]
    if report.results:
        counts = sorted({int(n) for cells in report.results.values() for n in cells})
        header = ["arm".ljust(18)] + [str(n).rjust(12) for n in counts]
        lines.append("".join(header))
        for arm, cells in report.results.items():
            row = [arm.ljust(18)]
            for n in counts:
                cell = cells.get(str(n))
                row.append((f"{cell['rmse']:.4f}" if cell else "-").rjust(12))
            lines.append("".join(row))
    if report.tracking:
        lines.append("arm".ljust(18) + "average rmse".rjust(14))
        for arm, data in report.tracking.items():
            if arm == "comparison":
                lines.append(f"sign test: {data['better']} < {data['worse']} "
                             f"wins={data['wins']} ties={data['ties']} p={data['p_value']:.4f}")
            else:
                lines.append(arm.ljust(18) + f"{data['average_rmse']:.4f}".rjust(14))
    for outcome in report.checks:
        status = "PASS" if outcome["passed"] else "FAIL"
        lines.append(f"[{status}] {outcome['description']}")
    return "\n".join(lines) + "\n"


def write_report(cfg: ExperimentConfig, report: RunReport) -> str:
    out = output_dir(cfg)
    os.makedirs(out, exist_ok=True)
    base = os.path.join(out, cfg.name)
    with open(base + ".report.json", "w") as fh:
        json.dump(report_to_json(report), fh, indent=1, sort_keys=True)
    with open(base + ".table.txt", "w") as fh:
        fh.write(render_table(report))
    return base + ".report.json"
