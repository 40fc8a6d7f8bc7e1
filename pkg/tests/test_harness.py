"""Harness-level tests: config plumbing, error metrics, replication runs,
declarative checks, report files, and the command-line entry points.

Hand-frozen values: binomial tail p-values computed from the definition
sum_{k>=wins} C(n,k)/2^n, and RMSE values small enough to do on paper.
"""

import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import pytest

from simcmc import cli, engine, harness, models
from simcmc.errors import LengthMismatch

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

LG_COUNTS = (1000, 2500, 5000, 10000, 25000)
KIT_COUNTS = (2500, 5000, 10000, 25000, 50000)


def tiny_lg_config(**overrides):
    base = dict(
        name="tiny-lg",
        model="linear-gaussian",
        params={"dim": 1},
        algorithms=("simcmc", "smc"),
        sample_counts=(40,),
        replications=2,
        seed=3,
        horizon=5,
        dataset_seed=11,
    )
    base.update(overrides)
    return harness.ExperimentConfig(**base)


def tracking_config(**overrides):
    base = dict(
        name="tiny-track",
        model="tracking",
        params={},
        replications=2,
        seed=1,
        horizon=8,
        dataset_seed=2,
        budget_per_unit=25,
        frontier_lag=1,
        arms=("smc", "smc-grid", "simcmc"),
    )
    base.update(overrides)
    return harness.ExperimentConfig(**base)


# ---------------------------------------------------------------- configs


def test_config_json_round_trip_preserves_every_field():
    cfg = tiny_lg_config(checks=({"type": "rmse_max", "arm": "smc", "count": 40, "max": 2.0},))
    payload = harness.config_to_json(cfg)
    assert payload["format"] == "simcmc-config"
    assert payload["algorithms"] == ["simcmc", "smc"]
    assert harness.config_from_json(payload) == cfg
    # through an actual file, including the json list/tuple normalization
    again = harness.config_from_json(json.loads(json.dumps(payload)))
    assert again == cfg


def test_load_config_reads_and_validates(tmp_path):
    cfg = tiny_lg_config()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(harness.config_to_json(cfg)))
    assert harness.load_config(str(path)) == cfg

    bad = harness.config_to_json(tiny_lg_config(horizon=0))
    path.write_text(json.dumps(bad))
    with pytest.raises(ValueError, match="horizon"):
        harness.load_config(str(path))


def test_config_hash_is_stable_and_sensitive():
    cfg = tiny_lg_config()
    h = harness.config_hash(cfg)
    assert h == harness.config_hash(tiny_lg_config())
    assert len(h) == 64
    assert h != harness.config_hash(dataclasses.replace(cfg, seed=cfg.seed + 1))
    assert h != harness.config_hash(dataclasses.replace(cfg, name="other"))


def test_validate_config_names_the_offending_field():
    with pytest.raises(ValueError, match="name: empty"):
        harness.validate_config(tiny_lg_config(name=""))
    with pytest.raises(ValueError, match="model: 'weird'"):
        harness.validate_config(tiny_lg_config(model="weird"))
    with pytest.raises(ValueError, match="proposal: 'guided'"):
        harness.validate_config(tiny_lg_config(proposal="guided"))
    with pytest.raises(ValueError, match="optimal proposal exists only"):
        harness.validate_config(tiny_lg_config(
            model="kitagawa", proposal="optimal", reference_count=10))
    with pytest.raises(ValueError, match="algorithms: 'annealing'"):
        harness.validate_config(tiny_lg_config(algorithms=("annealing",)))
    with pytest.raises(ValueError, match="sample_counts"):
        harness.validate_config(tiny_lg_config(sample_counts=(100, 0)))
    with pytest.raises(ValueError, match="replications"):
        harness.validate_config(tiny_lg_config(replications=0))
    with pytest.raises(ValueError, match="burn_in"):
        harness.validate_config(tiny_lg_config(burn_in=-1))
    with pytest.raises(ValueError, match="horizon"):
        harness.validate_config(tiny_lg_config(horizon=0))
    with pytest.raises(ValueError, match="reference_count"):
        harness.validate_config(tiny_lg_config(reference_count=-1))
    with pytest.raises(ValueError, match="no closed-form truth"):
        harness.validate_config(tiny_lg_config(model="kitagawa", reference_count=0))
    with pytest.raises(ValueError, match="budget_per_unit"):
        harness.validate_config(tracking_config(budget_per_unit=0))
    with pytest.raises(ValueError, match="frontier_lag"):
        harness.validate_config(tracking_config(frontier_lag=0))
    with pytest.raises(ValueError, match="arms: 'mcmc'"):
        harness.validate_config(tracking_config(arms=("smc", "mcmc")))


def test_validate_config_reports_all_problems_at_once():
    try:
        harness.validate_config(tiny_lg_config(name="", horizon=0, replications=0))
    except ValueError as err:
        message = str(err)
    else:
        raise AssertionError("expected a ValueError")
    assert message.startswith("invalid config: ")
    assert "name: empty" in message
    assert "horizon" in message
    assert "replications" in message
    assert message.count(";") == 2


# ---------------------------------------------------------------- metrics


def test_rmse_hand_values():
    assert harness.rmse([2.0, 2.0], [2.0, 2.0]) == 0.0
    assert harness.rmse([3.0], [1.0]) == 2.0
    # scalar truth broadcasts over the estimates
    assert harness.rmse([1.0, 3.0], 2.0) == 1.0


def test_rmse_agrees_with_vectorized_route():
    rng = np.random.default_rng(17)
    a = rng.normal(size=25)
    t = rng.normal(size=25)
    direct = float(np.sqrt(np.mean((a - t) ** 2)))
    assert harness.rmse(a.tolist(), t.tolist()) == pytest.approx(direct, abs=1e-12)
    scalar = float(np.sqrt(np.mean((a - 0.3) ** 2)))
    assert harness.rmse(a.tolist(), 0.3) == pytest.approx(scalar, abs=1e-12)


def test_rmse_rejects_empty_and_mismatched_inputs():
    with pytest.raises(LengthMismatch):
        harness.rmse([], [])
    with pytest.raises(LengthMismatch):
        harness.rmse([1.0, 2.0], [1.0])


def test_state_rmse_hand_value():
    estimates = [(1.0, 2.0), (3.0, 4.0)]
    truths = [(0.0, 2.0), (3.0, 2.0)]
    # squared errors 1, 0, 0, 4 over four components
    assert harness.state_rmse(estimates, truths) == pytest.approx(math.sqrt(1.25), abs=1e-15)
    with pytest.raises(LengthMismatch):
        harness.state_rmse(estimates, truths[:1])


def test_sign_test_frozen_binomial_tail():
    # 15 wins out of 20 informative pairs
    better = [0.0] * 15 + [2.0] * 5
    worse = [1.0] * 20
    wins, ties, p = harness.sign_test(better, worse)
    assert (wins, ties) == (15, 0)
    assert p == 0.020694732666015625


def test_sign_test_edge_cases():
    assert harness.sign_test([0.0, 0.0, 5.0], [1.0, 1.0, 5.0]) == (2, 1, 0.25)
    assert harness.sign_test([3.0, 3.0], [3.0, 3.0]) == (0, 2, 1.0)
    wins, ties, p = harness.sign_test([0.0] * 10, [1.0] * 10)
    assert (wins, ties) == (10, 0)
    assert p == 2.0 ** -10
    # zero wins: the upper tail from zero covers everything
    assert harness.sign_test([5.0] * 4, [1.0] * 4) == (0, 0, 1.0)
    with pytest.raises(LengthMismatch):
        harness.sign_test([1.0], [1.0, 2.0])


# ---------------------------------------------------------------- seeding


def test_child_seed_is_deterministic_and_key_sensitive():
    assert harness.child_seed(0, 1, 2) == harness.child_seed(0, 1, 2)
    seeds = {
        harness.child_seed(0),
        harness.child_seed(0, 0),
        harness.child_seed(0, 1),
        harness.child_seed(0, 0, 0),
        harness.child_seed(1, 0),
    }
    assert len(seeds) == 5
    for s in seeds:
        assert 0 <= s < 2 ** 64


def test_prior_path_shape_and_determinism():
    spec = models.LinearGaussianSpec(dim=2)
    ds = models.simulate("linear-gaussian", spec, 6, 1)
    model_obj = models.lg_model(spec, ds.observations)
    path = harness.prior_path(model_obj, 4)
    assert len(path) == 6
    assert all(len(block) == 2 for block in path)
    assert path == harness.prior_path(model_obj, 4)
    assert path != harness.prior_path(model_obj, 5)


def test_simcmc_log_likelihood_returns_final_chained_estimate():
    spec = models.LinearGaussianSpec(dim=1)
    ds = models.simulate("linear-gaussian", spec, 4, 9)
    model_obj = models.lg_model(spec, ds.observations)
    targets = models.ssm_targets(model_obj)
    proposals = models.prior_proposal(model_obj)
    ll, state = harness.simcmc_log_likelihood(targets, proposals, model_obj, 25, 6)
    assert math.isfinite(ll)
    assert state.iteration == 25
    assert state.frontier == 4
    assert engine.norm_const_estimates(state).log_chained[-1] == ll


# ---------------------------------------------------------------- runs


def test_run_experiment_report_schema_and_cells():
    cfg = tiny_lg_config()
    report = harness.run_experiment(cfg, write=False)

    assert report.name == cfg.name
    assert report.config_hash == harness.config_hash(cfg)
    assert report.code_version == harness.CODE_VERSION
    assert report.model == "linear-gaussian"
    assert report.truth["kind"] == "kalman"
    ds = models.simulate("linear-gaussian", cfg.spec(), cfg.horizon, cfg.dataset_seed)
    truth_ll = models.kalman_log_likelihood(cfg.spec(), ds.observations)
    assert report.truth["log_likelihood"] == pytest.approx(truth_ll, abs=1e-12)

    assert set(report.results) == {"simcmc", "smc"}
    for alg in ("simcmc", "smc"):
        cell = report.results[alg]["40"]
        assert len(cell["estimates"]) == cfg.replications
        assert all(math.isfinite(e) for e in cell["estimates"])
        assert cell["rmse"] == pytest.approx(
            harness.rmse(cell["estimates"], truth_ll), abs=1e-15)
    chain_cell = report.results["simcmc"]["40"]
    assert len(chain_cell["acceptance_mean"]) == cfg.horizon
    assert all(0.0 <= r <= 1.0 for r in chain_cell["acceptance_mean"])
    assert "acceptance_mean" not in report.results["smc"]["40"]

    assert set(report.timing) == {"simcmc:40", "smc:40"}
    assert report.tracking == {}
    assert report.checks == []


def test_run_experiment_is_deterministic_modulo_timing():
    cfg = tiny_lg_config()
    a = harness.run_experiment(cfg, write=False)
    b = harness.run_experiment(cfg, write=False)
    assert a.timing != {} and b.timing != {}
    assert harness.report_equal_modulo_timing(
        harness.report_to_json(a), harness.report_to_json(b))


def test_run_experiment_kitagawa_uses_large_run_reference():
    cfg = tiny_lg_config(
        name="tiny-kitagawa",
        model="kitagawa",
        params={},
        algorithms=("smc",),
        sample_counts=(30,),
        replications=1,
        horizon=4,
        reference_count=300,
    )
    report = harness.run_experiment(cfg, write=False)
    assert report.truth["kind"] == "smc-reference"
    assert report.truth["reference_count"] == 300
    assert math.isfinite(report.truth["log_likelihood"])
    assert set(report.results) == {"smc"}


def test_run_experiment_dispatches_tracking_model():
    cfg = tracking_config(arms=("smc", "simcmc"))
    report = harness.run_experiment(cfg, write=False)
    assert report.truth["kind"] == "simulated-states"
    assert report.results == {}
    assert set(report.tracking) == {"smc", "simcmc", "comparison"}


def test_tracking_comparison_structure_and_determinism():
    cfg = tracking_config()
    report = harness.tracking_comparison(cfg, write=False)

    assert set(report.tracking) == {"smc", "smc-grid", "simcmc", "comparison"}
    for arm in ("smc", "smc-grid", "simcmc"):
        data = report.tracking[arm]
        values = data["per_realization"]
        assert len(values) == cfg.replications
        assert all(v > 0.0 and math.isfinite(v) for v in values)
        assert data["average_rmse"] == pytest.approx(sum(values) / len(values), abs=1e-15)

    comp = report.tracking["comparison"]
    assert comp["better"] == "simcmc" and comp["worse"] == "smc"
    wins, ties, p = harness.sign_test(
        report.tracking["simcmc"]["per_realization"],
        report.tracking["smc"]["per_realization"])
    assert (comp["wins"], comp["ties"], comp["p_value"]) == (wins, ties, p)
    assert "tracking" in report.timing

    again = harness.tracking_comparison(cfg, write=False)
    assert harness.report_equal_modulo_timing(
        harness.report_to_json(report), harness.report_to_json(again))


def test_tracking_adaptive_run_predicts_before_first_arrival():
    spec = models.TrackingSpec()
    seed = None
    for candidate in range(1, 200):
        ds = models.simulate("tracking", spec, 10, candidate)
        if not ds.observed[0] and not ds.observed[1]:
            seed = candidate
            break
    assert seed is not None
    ds = models.simulate("tracking", spec, 10, seed)
    first_arrival = 1 + list(ds.observed).index(True)

    estimates = harness.tracking_adaptive_run(spec, ds, 20, 7)
    assert len(estimates) == ds.horizon
    assert all(len(e) == 4 for e in estimates)
    for n in range(1, first_arrival):
        assert estimates[n - 1] == models.predict_mean(spec, spec.init_mean, n - 1)
    assert estimates == harness.tracking_adaptive_run(spec, ds, 20, 7)


def test_reservoir_mean_matches_windowed_average():
    spec = models.LinearGaussianSpec(dim=2)
    ds = models.simulate("linear-gaussian", spec, 4, 3)
    model_obj = models.lg_model(spec, ds.observations)
    targets = models.ssm_targets(model_obj)
    proposals = models.prior_proposal(model_obj)
    state = engine.init(targets, proposals,
                        engine.nested_paths(harness.prior_path(model_obj, 5)),
                        burn_in=7, seed=5)
    for _ in range(60):
        engine.sweep(state)

    for level in (1, 4):
        entries = state.reservoirs[level - 1].entries
        lo = engine.window_start(len(entries) - 1, state.burn_in)
        manual = tuple(
            sum(e[j] for e in entries[lo:]) / (len(entries) - lo) for j in range(2))
        got = harness.reservoir_mean(state, level, 2)
        assert got == pytest.approx(manual, abs=1e-15)


# ---------------------------------------------------------------- checks


def _results_fixture():
    return {"simcmc": {"100": {"rmse": 0.5}, "1000": {"rmse": 0.2}}}


def _tracking_fixture():
    return {
        "simcmc": {"per_realization": [1.0] * 6},
        "smc": {"per_realization": [2.0] * 6},
    }


def test_evaluate_checks_rmse_max():
    cfg = tiny_lg_config(checks=(
        {"type": "rmse_max", "arm": "simcmc", "count": 1000, "max": 0.3},
        {"type": "rmse_max", "arm": "simcmc", "count": 1000, "max": 0.1},
    ))
    out = harness.evaluate_checks(cfg, _results_fixture(), {})
    assert [o["passed"] for o in out] == [True, False]
    assert "0.2000 <= 0.3" in out[0]["description"]


def test_evaluate_checks_rmse_decreasing():
    cfg = tiny_lg_config(checks=({"type": "rmse_decreasing", "arm": "simcmc"},))
    assert harness.evaluate_checks(cfg, _results_fixture(), {})[0]["passed"] is True
    rising = {"simcmc": {"100": {"rmse": 0.2}, "1000": {"rmse": 0.5}}}
    out = harness.evaluate_checks(cfg, rising, {})
    assert out[0]["passed"] is False
    # counts compare numerically, not lexically
    assert "from 0.2000 at 100 to 0.5000 at 1000" in out[0]["description"]


def test_evaluate_checks_rmse_range():
    cfg = tiny_lg_config(checks=(
        {"type": "rmse_range", "arm": "simcmc", "count": 100, "low": 0.4, "high": 0.6},
        {"type": "rmse_range", "arm": "simcmc", "count": 100, "low": 0.0, "high": 0.1},
    ))
    out = harness.evaluate_checks(cfg, _results_fixture(), {})
    assert [o["passed"] for o in out] == [True, False]


def test_evaluate_checks_ordering_sign_test():
    cfg = tracking_config(checks=(
        {"type": "ordering", "better": "simcmc", "worse": "smc", "level": 0.05},
        {"type": "ordering", "better": "smc", "worse": "simcmc", "level": 0.05},
    ))
    out = harness.evaluate_checks(cfg, {}, _tracking_fixture())
    # 6 sure wins: p = 2^-6 < 0.05; the reversed direction has zero wins
    assert [o["passed"] for o in out] == [True, False]
    assert "6 of 6 pairs" in out[0]["description"]


def test_evaluate_checks_unknown_type_fails_closed():
    cfg = tiny_lg_config(checks=({"type": "quantile"},))
    out = harness.evaluate_checks(cfg, _results_fixture(), {})
    assert out[0]["passed"] is False
    assert "unknown check type 'quantile'" in out[0]["description"]


# ---------------------------------------------------------------- reports


def _demo_report(**overrides):
    base = dict(
        name="demo",
        config_hash="c" * 64,
        code_version=harness.CODE_VERSION,
        model="linear-gaussian",
        truth={"kind": "kalman", "log_likelihood": -1.0, "reference_count": None},
        results={"simcmc": {"100": {"rmse": 0.5, "estimates": [0.1]},
                            "400": {"rmse": 0.25, "estimates": [0.2]}}},
        tracking={},
        timing={"simcmc:100": 0.01},
        checks=[{"description": "demo bound", "passed": True},
                {"description": "demo order", "passed": False}],
    )
    base.update(overrides)
    return harness.RunReport(**base)


def test_render_table_lists_cells_and_check_outcomes():
    text = harness.render_table(_demo_report())
    lines = text.splitlines()
    assert lines[0] == "experiment: demo"
    assert lines[1] == "model: linear-gaussian"
    header = lines[2]
    assert header.index("100") < header.index("400")
    row = next(l for l in lines if l.startswith("simcmc"))
    assert "0.5000" in row and "0.2500" in row
    assert "[PASS] demo bound" in lines
    assert "[FAIL] demo order" in lines
    assert text.endswith("\n")


def test_render_table_tracking_rows_and_sign_test_line():
    report = _demo_report(
        model="tracking",
        results={},
        tracking={
            "smc": {"average_rmse": 2.14, "per_realization": [2.14]},
            "simcmc": {"average_rmse": 1.62, "per_realization": [1.62]},
            "comparison": {"better": "simcmc", "worse": "smc",
                           "wins": 15, "ties": 0,
                           "p_value": 0.020694732666015625},
        },
        checks=[],
    )
    text = harness.render_table(report)
    assert "smc               " in text and "2.1400" in text
    assert "1.6200" in text
    assert "sign test: simcmc < smc wins=15 ties=0 p=0.0207" in text


def test_report_equal_modulo_timing_ignores_only_timing():
    a = harness.report_to_json(_demo_report())
    b = harness.report_to_json(_demo_report(timing={"simcmc:100": 99.0}))
    assert harness.report_equal_modulo_timing(a, b)
    c = harness.report_to_json(_demo_report(name="other"))
    assert not harness.report_equal_modulo_timing(a, c)


def test_write_report_emits_json_and_table(tmp_path):
    cfg = tiny_lg_config(name="demo", output=str(tmp_path))
    report = _demo_report(config_hash=harness.config_hash(cfg))
    path = harness.write_report(cfg, report)
    assert path == str(tmp_path / "demo.report.json")

    with open(path) as fh:
        payload = json.load(fh)
    assert payload["format"] == "simcmc-report"
    assert payload == harness.report_to_json(report)

    table = (tmp_path / "demo.table.txt").read_text()
    assert table == harness.render_table(report)


def test_output_dir_precedence(monkeypatch):
    monkeypatch.delenv("SIMCMC_OUTPUT_DIR", raising=False)
    assert harness.output_dir(tiny_lg_config(output="/somewhere")) == "/somewhere"
    assert harness.output_dir(tiny_lg_config()) == "."
    assert harness.output_dir() == "."
    monkeypatch.setenv("SIMCMC_OUTPUT_DIR", "/elsewhere")
    assert harness.output_dir(tiny_lg_config()) == "/elsewhere"
    # an explicit config path still wins over the environment
    assert harness.output_dir(tiny_lg_config(output="/somewhere")) == "/somewhere"


# ---------------------------------------------------------------- shipped configs


def test_shipped_configs_load_and_cover_the_benchmark_grid():
    for proposal in ("prior", "optimal"):
        for d in (2, 5, 10):
            cfg = harness.load_config(str(CONFIG_DIR / f"lg_{proposal}_d{d}.json"))
            assert cfg.sample_counts == LG_COUNTS
            assert cfg.replications == 100
            assert cfg.proposal == proposal
            assert cfg.horizon == 100
            assert cfg.spec().dim == d
            assert set(cfg.algorithms) == {"simcmc", "smc"}
    for s in (1, 2, 5):
        cfg = harness.load_config(str(CONFIG_DIR / f"kitagawa_sw{s}.json"))
        assert cfg.sample_counts == KIT_COUNTS
        assert cfg.replications == 100
        assert cfg.reference_count == 100000
        spec = cfg.spec()
        assert spec.obs_noise_var == float(s)
        assert spec.process_noise_var == 5.0
    cfg = harness.load_config(str(CONFIG_DIR / "tracking_realtime.json"))
    assert cfg.budget_per_unit == 1000
    assert cfg.replications == 50
    assert cfg.horizon == 100
    assert cfg.arms == ("smc", "smc-grid", "simcmc")


def test_shipped_acceptance_configs_declare_their_checks():
    cfg = harness.load_config(str(CONFIG_DIR / "acceptance_lg_optimal_d2.json"))
    assert cfg.sample_counts == (1000, 25000)
    assert cfg.replications == 20
    kinds = [c["type"] for c in cfg.checks]
    assert kinds == ["rmse_max", "rmse_decreasing"]
    assert cfg.checks[0]["max"] == 0.15

    cfg = harness.load_config(str(CONFIG_DIR / "acceptance_lg_prior_d2.json"))
    assert cfg.sample_counts == (1000, 25000)
    ranges = [c for c in cfg.checks if c["type"] == "rmse_range"]
    assert ranges and ranges[0]["low"] == 0.8 and ranges[0]["high"] == 3.2

    cfg = harness.load_config(str(CONFIG_DIR / "acceptance_kitagawa_sw5.json"))
    assert cfg.sample_counts == (2500, 50000)
    assert cfg.reference_count == 100000
    assert cfg.spec().obs_noise_var == 5.0
    assert any(c["type"] == "rmse_max" and c["max"] == 0.25 for c in cfg.checks)

    cfg = harness.load_config(str(CONFIG_DIR / "acceptance_tracking.json"))
    assert cfg.budget_per_unit == 250
    assert cfg.replications == 20
    assert cfg.horizon == 100
    assert cfg.checks[0] == {"type": "ordering", "better": "simcmc",
                             "worse": "smc", "level": 0.05}


# ---------------------------------------------------------------- cli


def _write_cli_config(tmp_path, name="cli-tiny", **overrides):
    payload = {
        "name": name,
        "model": "linear-gaussian",
        "params": {"dim": 1},
        "algorithms": ["simcmc"],
        "sample_counts": [12],
        "replications": 1,
        "seed": 2,
        "horizon": 3,
        "dataset_seed": 4,
        "output": str(tmp_path),
        "format": "simcmc-config",
    }
    payload.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_cli_run_experiment_writes_report_files(tmp_path, capsys):
    path = _write_cli_config(tmp_path)
    assert cli.main(["run-experiment", path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("experiment: cli-tiny")
    assert (tmp_path / "cli-tiny.report.json").exists()
    assert (tmp_path / "cli-tiny.table.txt").exists()


def test_cli_check_flag_drives_the_exit_code(tmp_path, capsys):
    passing = _write_cli_config(tmp_path, name="cli-pass", checks=[
        {"type": "rmse_max", "arm": "simcmc", "count": 12, "max": 1e9}])
    assert cli.main(["run-experiment", passing, "--check"]) == 0

    failing = _write_cli_config(tmp_path, name="cli-fail", checks=[
        {"type": "rmse_max", "arm": "simcmc", "count": 12, "max": -1.0}])
    assert cli.main(["run-experiment", failing, "--check"]) == 1
    assert "[FAIL]" in capsys.readouterr().out
    # without the flag a failing check only shows in the table
    assert cli.main(["run-experiment", failing]) == 0

    bare = _write_cli_config(tmp_path, name="cli-bare")
    assert cli.main(["run-experiment", bare, "--check"]) == 1
    assert "no checks declared" in capsys.readouterr().err


def test_cli_tracking_subcommand(tmp_path, capsys):
    path = _write_cli_config(
        tmp_path, name="cli-track", model="tracking", params={},
        algorithms=["simcmc"], sample_counts=[10], replications=1, horizon=5,
        budget_per_unit=8, frontier_lag=1, arms=["smc", "simcmc"])
    assert cli.main(["tracking", path]) == 0
    out = capsys.readouterr().out
    assert "sign test: simcmc < smc" in out
    assert (tmp_path / "cli-track.report.json").exists()


def test_cli_verify_kernel(capsys):
    assert cli.main(["verify-kernel", "--instances", "2", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "worst stationarity residual" in out
    assert "failures: 0" in out

    # an impossible tolerance flips the exit code exactly when a residual is nonzero
    rc = cli.main(["verify-kernel", "--instances", "3", "--seed", "1",
                   "--tolerance", "0"])
    out = capsys.readouterr().out
    failures = int(out.rsplit("failures:", 1)[1])
    assert rc == (1 if failures else 0)


def test_cli_simulate_writes_a_loadable_dataset(tmp_path, capsys):
    out_path = tmp_path / "lg3.dataset.json"
    rc = cli.main(["simulate", "linear-gaussian", "--seed", "5",
                   "--out", str(out_path), "--horizon", "6",
                   "--params", '{"dim": 3}'])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    ds = models.load_dataset(str(out_path))
    assert ds.horizon == 6
    assert ds.model == "linear-gaussian"
    assert len(ds.states[0]) == 3
    assert models.dataset_spec(ds) == models.LinearGaussianSpec(dim=3)
