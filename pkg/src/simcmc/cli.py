"""Command-line entry points: experiment runs, tracking comparisons, exact
kernel verification on random discrete instances, and dataset simulation."""

from __future__ import annotations

import argparse
import json
import sys

from . import discrete, harness, models


def _cmd_run_experiment(args) -> int:
    cfg = harness.load_config(args.config)
    report = harness.run_experiment(cfg)
    print(harness.render_table(report), end="")
    if args.check:
        failed = [c for c in report.checks if not c["passed"]]
        if failed or not report.checks:
            if not report.checks:
                print("no checks declared in config", file=sys.stderr)
            return 1
    return 0


def _cmd_tracking(args) -> int:
    cfg = harness.load_config(args.config)
    report = harness.tracking_comparison(cfg)
    print(harness.render_table(report), end="")
    if args.check:
        failed = [c for c in report.checks if not c["passed"]]
        if failed or not report.checks:
            if not report.checks:
                print("no checks declared in config", file=sys.stderr)
            return 1
    return 0


def _cmd_verify_kernel(args) -> int:
    import numpy as np

    worst_stationarity = 0.0
    worst_identity = 0.0
    worst_fixed_point = 0.0
    failures = 0
    for r in range(args.instances):
        dts = discrete.random_instance(args.seed + r)
        tables = discrete.enumerate_exact(dts)
        mixtures = np.random.default_rng(args.seed + 7 * r + 1)
        for n in range(1, dts.horizon + 1):
            mus = [None] if n == 1 else [tables.marginals[n - 2]]
            if n > 1:
                raw = mixtures.uniform(0.05, 1.0, size=tables.marginals[n - 2].shape)
                mus.append(raw / raw.sum())
            worst_here = 0.0
            for mu in mus:
                resid = discrete.stationarity_residual(dts, n, mu)
                worst_here = max(worst_here, resid)
            worst_stationarity = max(worst_stationarity, worst_here)
            law = discrete.invariant_law(dts, n, None if n == 1 else tables.marginals[n - 2])
            fixed = float(abs(law - tables.marginals[n - 1]).max())
            worst_fixed_point = max(worst_fixed_point, fixed)
            ident = discrete.identity_check(dts, n)
            worst_identity = max(worst_identity, ident)
            if worst_here > args.tolerance or fixed > args.tolerance or ident > args.tolerance:
                failures += 1
    print(f"instances: {args.instances}")
    print(f"worst stationarity residual: {worst_stationarity:.3e}")
    print(f"worst fixed-point residual: {worst_fixed_point:.3e}")
    print(f"worst constant-ratio identity residual: {worst_identity:.3e}")
    print(f"tolerance: {args.tolerance:.1e}  failures: {failures}")
    return 1 if failures else 0


def _cmd_simulate(args) -> int:
    cls = models._SPEC_CLASSES[args.model]
    params = json.loads(args.params) if args.params else {}
    for key, value in params.items():
        if isinstance(value, list):
            params[key] = tuple(value)
    spec = cls(**params)
    ds = models.simulate(args.model, spec, args.horizon, args.seed)
    models.save_dataset(ds, args.out)
    observed = sum(1 for f in ds.observed if f)
    print(f"wrote {args.out}: {args.model}, horizon {ds.horizon}, {observed} observations")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simcmc",
        description="Interacting-chain and particle-filter experiments on state-space models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run-experiment", help="run a config's replication grid")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--check", action="store_true",
                       help="exit nonzero unless every declared check passes")
    p_run.set_defaults(func=_cmd_run_experiment)

    p_track = sub.add_parser("tracking", help="run the budgeted tracking comparison")
    p_track.add_argument("config", help="path to a JSON experiment config")
    p_track.add_argument("--check", action="store_true",
                         help="exit nonzero unless every declared check passes")
    p_track.set_defaults(func=_cmd_tracking)

    p_verify = sub.add_parser("verify-kernel",
                              help="exact stationarity and identity checks on random discrete instances")
    p_verify.add_argument("--instances", type=int, default=100)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--tolerance", type=float, default=1e-12)
    p_verify.set_defaults(func=_cmd_verify_kernel)

    p_sim = sub.add_parser("simulate", help="write one simulated dataset file")
    p_sim.add_argument("model", choices=sorted(models._SPEC_CLASSES))
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--horizon", type=int, default=100)
    p_sim.add_argument("--params", default="",
                       help="JSON object of model parameters overriding the defaults")
    p_sim.set_defaults(func=_cmd_simulate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
