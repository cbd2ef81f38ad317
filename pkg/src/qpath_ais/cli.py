"""Command line interface.

Subcommands: ``run <config>`` for a YAML config file, ``table1`` /
``bdmc-curve`` / ``density-grid`` for the built-in sweeps, and
``selftest`` for the fixture-free property checks.  Exit codes: 0 on
success, 2 for config errors, 3 for runtime numerical failures.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np
import yaml

from . import harness
from .ais import enumerate_discrete_ais, metropolis_kernel, discrete_path_pmf
from .deformed import exp_q, ln_q, verify_q_identities
from .densities import GaussianSpec, make_gaussian
from .errors import ConfigError, NumericalFailureError
from .hmc import leapfrog
from .paths import QPath, Schedule, linear_schedule, log_density_at, q_exp_form_check


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="CSV output path (stdout if omitted)")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
    p.add_argument("--quiet", action="store_true", help="suppress summary and timing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpath-ais",
        description="Annealed importance sampling over power-mean paths",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a YAML config")
    run.add_argument("config_path", nargs="?", default=None)
    run.add_argument("--config", dest="config_flag", default=None, help="config path")
    _add_common(run)

    for name, help_text in (
        ("table1", "built-in partition-estimate sweep (T = 100)"),
        ("bdmc-curve", "built-in two-sided bound sweep over T"),
        ("density-grid", "built-in ridge-plot density grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    sub.add_parser("selftest", help="run the fixture-free property checks")
    return parser


def _emit(rows, config, args) -> None:
    csv_text = harness.format_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        harness.write_jsonl(rows, str(args.out) + ".jsonl")
    else:
        sys.stdout.write(csv_text)
    if not args.quiet and rows and isinstance(rows[0], harness.ResultRow):
        z_true = config.z_true
        print(f"{'q':>6} {'T':>6} {'seeds':>6} {'mean':>10} {'std':>10} {'|err|':>10}",
              file=sys.stderr)
        for a in harness.aggregate(rows, z_true):
            std = f"{a.std_z:.4f}" if a.std_z is not None else "-"
            err = f"{a.abs_error:.4f}" if a.abs_error is not None else "-"
            print(f"{a.q:>6.2f} {a.T:>6d} {a.n_seeds:>6d} {a.mean_z:>10.4f} "
                  f"{std:>10} {err:>10}", file=sys.stderr)


def _run_config(raw: dict, args) -> int:
    if args.seed is not None:
        raw = dict(raw)
        raw["base_seed"] = args.seed
    config = harness.ExperimentConfig.from_dict(raw)
    start = time.perf_counter()
    try:
        rows = harness.run_experiment(config, threads=args.threads)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    _emit(rows, config, args)
    if not args.quiet:
        print(f"completed in {time.perf_counter() - start:.1f}s", file=sys.stderr)
    return 0


def _selftest() -> int:
    """Property checks needing no fixtures; one PASS/FAIL line each."""
    rng = np.random.default_rng(7)
    checks = []

    # tolerance widens where one ulp of the intermediate ln_q value already
    # moves the round trip by more than 1e-12 (q > 1 with large u)
    u = np.exp(rng.uniform(-8, 8, size=200))
    ok = True
    for q in (-1.0, 0.0, 0.5, 1.0, 2.0):
        for x in u:
            v = ln_q(x, q)
            limit = max(1e-12, 4.0 * np.spacing(abs(v)) / abs(1.0 + (1.0 - q) * v))
            ok = ok and abs(exp_q(v, q) - x) <= limit * x
    checks.append(("deformed log/exp inverse pair", ok))

    ok = all(
        verify_q_identities(rng.uniform(-0.1, 0.1, size=4), q, 1e-10)
        for q in (0.0, 0.5, 1.0, 1.5, 2.0)
        for _ in range(20)
    )
    checks.append(("deformed sum/product identities", ok))

    base = make_gaussian(GaussianSpec(-4.0, 3.0))
    target = make_gaussian(GaussianSpec(4.0, 1.0))
    ok = True
    for _ in range(50):
        q = rng.uniform(-0.5, 2.5)
        beta = rng.uniform(0.01, 0.99)
        z = rng.uniform(-8, 8)
        path = QPath(base, target, q)
        lhs = log_density_at(path, beta, z)
        rhs = q_exp_form_check(path, beta, z)
        ok = ok and abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    checks.append(("deformed-exponential form of the path", ok))

    ok = True
    for _ in range(10):
        n_states = int(rng.integers(2, 5))
        b = rng.uniform(0.5, 2.0, size=n_states)
        t = rng.uniform(0.5, 2.0, size=n_states)
        q = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        sched = linear_schedule(int(rng.integers(1, 4)))
        kernels = [
            metropolis_kernel(discrete_path_pmf(b, t, q, beta))
            for beta in sched.betas[1:]
        ]
        ew = enumerate_discrete_ais(n_states, b, t, q, sched, kernels)
        ok = ok and abs(ew - t.sum() / b.sum()) <= 1e-12 * (t.sum() / b.sum())
    checks.append(("discrete enumeration is unbiased", ok))

    grad = lambda x: -x
    z0, p0 = np.array([0.7]), np.array([-0.3])
    z1, p1 = leapfrog(grad, z0, p0, 0.1, 25)
    z2, p2 = leapfrog(grad, z1, -p1, 0.1, 25)
    ok = abs(float(z2[0] - z0[0])) < 1e-10 and abs(float(-p2[0] - p0[0])) < 1e-10
    checks.append(("leapfrog reversibility", ok))

    failed = 0
    for name, ok in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest()
    try:
        if args.command == "run":
            path = args.config_flag or args.config_path
            if path is None:
                print("config error: run needs a config path", file=sys.stderr)
                return 2
            with open(path, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
            return _run_config(raw, args)
        builders = {
            "table1": harness.table1_config,
            "bdmc-curve": harness.bdmc_curve_config,
            "density-grid": harness.density_grid_config,
        }
        return _run_config(builders[args.command](), args)
    except (ConfigError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
