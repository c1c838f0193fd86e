"""``vacq`` command line: simulate, solve, analytic, compare.

Exit codes: 0 ok, 2 bad input, 3 unstable configuration, 4 no convergence,
5 a validation check failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from .closedform import ClosedFormError, ddet_exp_solution, dm_exp_solution
from .model import BALKING, RENEGING, DistributionSpec, MixedDistribution, QueueConfig, SpecError, check_stability
from .montecarlo import estimate_stationary
from .solver import ConvergenceError, UnstableConfigError, solve_balking_stationary, solve_reneging_stationary
from .validate import compare_pillars

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text}")
    return value


def _decimal(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from None
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"not finite: {text}")
    return value


def _default_seed() -> int:
    raw = os.environ.get("VACQ_SEED")
    if raw is None:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise InputError(f"VACQ_SEED must be an integer, got {raw!r}") from None
    if seed < 0:
        raise InputError("VACQ_SEED must be nonnegative")
    return seed


def _queue_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=(RENEGING, BALKING), required=True)
    p.add_argument("--T", type=_decimal, required=True, help="interarrival time")
    p.add_argument("--K", type=_decimal, required=True, help="deadline")
    p.add_argument("--service", required=True, help="det:<v>, exp:<rate> or tab:<file.csv>")
    p.add_argument("--vacation", required=True, help="det:<v>, exp:<rate> or tab:<file.csv>")


def _sim_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--customers", type=_positive_int, required=required, default=1_000_000)
    p.add_argument("--reps", type=_positive_int, required=required, default=8)
    p.add_argument("--burnin", type=_nonneg_int, default=None)
    p.add_argument("--seed", type=_nonneg_int, default=None, help="default: $VACQ_SEED or 0")
    p.add_argument("--threads", type=_positive_int, default=None)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=_positive_int, default=4096)
    p.add_argument("--tol", type=_decimal, default=1e-10)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vacq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of the stationary law")
    _queue_flags(p)
    _sim_flags(p, required=True)
    p.add_argument("--grid", type=_positive_int, default=512, help="histogram cells on [0, K)")
    p.add_argument("--out", required=True, help="output prefix for .csv and .json")

    p = sub.add_parser("solve", help="fixed-point solution of the stationary equation")
    _queue_flags(p)
    _solver_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("analytic", help="closed-form constants for exponential vacations")
    p.add_argument("--case", choices=("d-exp", "m-exp"), required=True)
    p.add_argument("--lambda", dest="lam", type=_decimal, required=True, help="vacation rate")
    p.add_argument("--sigma", type=_decimal, help="deterministic service time (d-exp)")
    p.add_argument("--mu", type=_decimal, help="service rate (m-exp)")
    p.add_argument("--T", type=_decimal, required=True)
    p.add_argument("--K", type=_decimal, required=True)
    p.add_argument("--grid", type=_positive_int, default=1024, help="density rows in the CSV")
    p.add_argument("--out", help="output prefix; JSON goes to stdout when omitted")

    p = sub.add_parser("compare", help="cross-check simulation, solver and closed form")
    _queue_flags(p)
    _sim_flags(p, required=False)
    _solver_flags(p)
    p.add_argument("--out", help="output prefix; JSON goes to stdout when omitted")
    return parser


def _config(args) -> QueueConfig:
    service = DistributionSpec.parse(args.service)
    vacation = DistributionSpec.parse(args.vacation)
    return QueueConfig(args.T, args.K, service, vacation, args.model)


def _dump(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(prefix, payload: dict, dist: MixedDistribution | None) -> None:
    if prefix is None:
        sys.stdout.write(_dump(payload))
        return
    if dist is not None:
        dist.to_csv(f"{prefix}.csv")
    with open(f"{prefix}.json", "w") as fh:
        fh.write(_dump(payload))


def cmd_simulate(args) -> int:
    config = _config(args)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.burnin is not None and args.burnin >= args.customers:
        raise InputError("--burnin must be smaller than --customers")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        summary = estimate_stationary(config, args.customers, burn_in=args.burnin, replications=args.reps,
                                      seed=seed, grid_size=args.grid, threads=args.threads)
    payload = {"schema_version": SCHEMA_VERSION, "command": "simulate", "config": config.to_dict()}
    payload.update(summary.to_dict())
    payload["warning"] = None if summary.stable else "unstable: P(service + vacation < T) = 0"
    _write(args.out, payload, summary.distribution)
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _config(args)
    solve = solve_balking_stationary if config.discipline == BALKING else solve_reneging_stationary
    result = solve(config, grid_size=args.grid, tol=args.tol, max_iter=args.max_iter)
    payload = {
        "schema_version": SCHEMA_VERSION, "command": "solve", "config": config.to_dict(),
        "grid": args.grid, "tol": args.tol, "stable": True,
        "stability_probability": check_stability(config).probability,
        "W0": result.W.atom0, "BK": result.BK, "BK_check": result.BK_check,
        "mean_wait": result.W.mean(),
        "iterations": result.iterations, "residual": result.residual,
    }
    _write(args.out, payload, result.W)
    return EXIT_OK


def cmd_analytic(args) -> int:
    if args.case == "d-exp":
        if args.sigma is None:
            raise InputError("--sigma is required for --case d-exp")
        sol = ddet_exp_solution(args.lam, args.sigma, args.T, args.K)
    else:
        if args.mu is None:
            raise InputError("--mu is required for --case m-exp")
        sol = dm_exp_solution(args.lam, args.mu, args.T, args.K)
    payload = {"schema_version": SCHEMA_VERSION, "command": "analytic"}
    payload.update(sol.to_dict())
    payload["normalization_defect"] = sol.normalization_defect()
    h = args.K / args.grid
    mids = (np.arange(args.grid) + 0.5) * h
    dist = MixedDistribution(sol.W0, sol.density(mids), args.K, sol.BK, RENEGING)
    _write(args.out, payload, dist)
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _config(args)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.burnin is not None and args.burnin >= args.customers:
        raise InputError("--burnin must be smaller than --customers")
    report = compare_pillars(config, customers=args.customers, replications=args.reps, seed=seed,
                             grid_size=args.grid, tol=args.tol, burn_in=args.burnin, threads=args.threads)
    payload = {"schema_version": SCHEMA_VERSION, "command": "compare"}
    payload.update(report)
    _write(args.out, payload, None)
    for check in report["checks"]:
        verdict = "PASS" if check["passed"] else "FAIL"
        print(f"{verdict} {check['name']}: {check['value']:.4g} (tolerance {check['tolerance']:g} {check['unit']})",
              file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "analytic": cmd_analytic, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, SpecError, ClosedFormError) as exc:
        print(f"vacq: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnstableConfigError as exc:
        print(f"vacq: unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ConvergenceError as exc:
        print(f"vacq: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
