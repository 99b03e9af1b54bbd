"""Command-line front end.

Exit codes: 0 success, 1 solver failure, 2 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .conic import DEFAULT_TOLERANCES, PowerControlInfeasible, SolverFailure
from .experiments import (DEFAULT_RHO_GRID, DEFAULT_SNR_GRID, SweepSettings, parse_constraint, summarize,
                          sweep_snr, sweep_users, write_csv, write_plot_script)
from .instances import complex_pairs, load_instance, solve_report, write_json
from .model import DEFAULT_RANK_TOL, ValidationError
from .oracle import OracleConfig, brute_force_max_min
from .randomization import RNG_ALGORITHM, RandomizationConfig, solve_algorithm1
from .relaxed import BisectionConfig, verify_claim1
from .selftest import run_selftest

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2


def _float_list(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _common(p: argparse.ArgumentParser, out_required: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--n-rand", type=int, default=50, help="Gaussian candidates per solve (default 50)")
    p.add_argument("--epsilon", type=float, default=1e-3, help="bisection interval width (default 1e-3)")
    p.add_argument("--out", type=Path, required=out_required, help="output file")


def _sweep_args(p: argparse.ArgumentParser) -> None:
    _common(p, out_required=True)
    p.add_argument("--trials", type=int, default=100, help="trials per sweep point (default 100)")
    p.add_argument("--constraint", choices=("pac", "spc", "both"), default="both")
    p.add_argument("--n-antennas", type=int, default=5)
    p.add_argument("--n-groups", type=int, default=2)
    p.add_argument("--timing", action="store_true",
                   help="fill the wall_time_ms column (makes the CSV run-dependent)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $MAXMIN_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxmin-multicast",
                                     description="Max-min fair multigroup multicast beamforming.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance file and write a JSON report")
    p.add_argument("instance", type=Path)
    _common(p)
    p.add_argument("--verify-claim1", action="store_true",
                   help="also report the round-trip residuals between the fairness and utilization problems")
    p.add_argument("--probe", type=float, default=None,
                   help="SINR target for the round trip (default: 1, or half the relaxed optimum if smaller)")

    p = sub.add_parser("sweep-snr", help="Monte Carlo sweep over total transmit SNR")
    _sweep_args(p)
    p.add_argument("--snr", type=_float_list, default=list(DEFAULT_SNR_GRID), help="comma-separated dB values")
    p.add_argument("--n-users", type=int, default=4)

    p = sub.add_parser("sweep-users", help="Monte Carlo sweep over users per group")
    _sweep_args(p)
    p.add_argument("--rho", type=_float_list, default=list(DEFAULT_RHO_GRID), help="comma-separated ratios")
    p.add_argument("--snr-db", type=float, default=10.0)

    p = sub.add_parser("oracle", help="brute-force reference for a tiny instance file")
    p.add_argument("instance", type=Path)
    p.add_argument("--grid", type=int, default=64, help="grid intervals per angular dimension")
    p.add_argument("--restarts", type=int, default=8, help="local refinements after the grid pass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("selftest", help="run the built-in sanity suite")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(doc: dict, out: Optional[Path]) -> None:
    if out is None:
        print(json.dumps(doc, indent=2))
    else:
        write_json(doc, out)
        print(f"wrote {out}")


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    bis = BisectionConfig(epsilon=args.epsilon)
    rand_cfg = RandomizationConfig(n_rand=args.n_rand, seed=args.seed)
    result = solve_algorithm1(inst.channels, inst.groups, inst.budget, bis, rand_cfg)
    config = {
        "instance": str(args.instance), "seed": args.seed, "n_rand": args.n_rand, "epsilon": args.epsilon,
        "feas_tol": DEFAULT_TOLERANCES.feas_tol, "opt_gap_tol": DEFAULT_TOLERANCES.opt_gap_tol,
        "max_iters": DEFAULT_TOLERANCES.max_iters, "rank_tol": DEFAULT_RANK_TOL, "rng": RNG_ALGORITHM,
        "version": __version__,
    }
    round_trip = None
    if args.verify_claim1:
        t_star = result.relaxed.t_star
        probe = args.probe if args.probe is not None else (1.0 if t_star > 1.0 else 0.5 * t_star)
        if not probe > 0:
            raise ValidationError("the relaxed optimum is zero, so there is no positive probe target")
        round_trip = (probe, verify_claim1(inst.channels, inst.groups, inst.budget, probe, bis=bis))
    _emit(solve_report(result, config, round_trip), args.out)
    return EXIT_OK


def _sweep(args, axis: str) -> int:
    settings = SweepSettings(n_antennas=args.n_antennas, n_groups=args.n_groups, n_trials=args.trials,
                             seed=args.seed, n_rand=args.n_rand, epsilon=args.epsilon,
                             kinds=parse_constraint(args.constraint), timing=args.timing, workers=args.workers)
    if axis == "snr_db":
        settings = SweepSettings(**{**settings.__dict__, "n_users": args.n_users})
        records = sweep_snr(args.snr, settings)
    else:
        settings = SweepSettings(**{**settings.__dict__, "snr_db": args.snr_db})
        records = sweep_users(args.rho, settings)
    write_csv(records, args.out)
    script = write_plot_script(args.out, axis)
    label = "snr_db" if axis == "snr_db" else "rho"
    print(f"{label:>8} kind  mean_relaxed  mean_achieved  mean_gap")
    for s in summarize(records, axis):
        print(f"{s.point:8g} {s.kind.value:4}  {s.mean_t_relaxed:12.5f}  {s.mean_t_achieved:13.5f}  {s.mean_gap:8.5f}")
    print(f"wrote {args.out} and {script}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    cfg = OracleConfig(grid_points_per_dim=args.grid, random_restarts=args.restarts, seed=args.seed)
    res = brute_force_max_min(inst.channels, inst.groups, inst.budget, cfg)
    doc = {"config": {"instance": str(args.instance), "grid": args.grid, "restarts": args.restarts,
                      "seed": args.seed},
           "t_hat": res.t_hat, "precoders": complex_pairs(res.precoders.vectors)}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    report = run_selftest(epsilon=args.epsilon, seed=args.seed)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_SOLVER


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "sweep-snr": lambda a: _sweep(a, "snr_db"),
        "sweep-users": lambda a: _sweep(a, "rho"),
        "oracle": cmd_oracle,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except (SolverFailure, PowerControlInfeasible) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
