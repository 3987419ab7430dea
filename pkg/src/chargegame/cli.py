"""Command line entry point: ``chargegame <experiment|solve> [options]``.

Exit codes: 0 success, 1 configuration or I/O error, 2 a trial failed to
converge, 3 verification failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import NonConvergenceError, solve_nash
from .experiments import EXPERIMENTS, run_experiment, sample_game, trial_rng
from .game import ChargingGame
from .welfare import cooperative_supremum, social_welfare

log = logging.getLogger("chargegame")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chargegame", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key: value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", metavar="DIR", default="results", help="output directory [results]")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    solve = sub.add_parser("solve", parents=[common], help="solve one instance and print x*, welfare and PoA")
    solve.add_argument("--rates", type=_floats, help="C_i/D_i per user (W), comma separated")
    solve.add_argument("--efficiencies", type=_floats, help="h_i per user, comma separated")
    return parser


def _solve(cfg: ExperimentConfig, args) -> int:
    if args.rates or args.efficiencies:
        if not (args.rates and args.efficiencies):
            raise ConfigError("--rates and --efficiencies must be given together")
        try:
            game = ChargingGame.from_rates(args.rates, args.efficiencies, cfg.power_P, cfg.lambdas[0])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        game = sample_game(cfg, trial_rng(cfg.seed, 0))
    try:
        x, trace = solve_nash(game, cfg.solver())
    except NonConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_NONCONVERGENCE
    w = social_welfare(x, game)
    out = {
        "M": game.M,
        "K": game.aggregate_K.tolist(),
        "equilibrium": x.tolist(),
        "iterations": trace.iterations_used,
        "fixed_point_residual": trace.fixed_point_residual,
        "welfare": w,
        "cooperative_supremum": cooperative_supremum(game),
        "poa": cooperative_supremum(game) / w,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "solve":
            return _solve(cfg, args)
        result, paths = run_experiment(args.command, cfg, args.out)
    except (ConfigError, ValueError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_CONFIG
    for p in paths:
        log.info("wrote %s", p)
    if result.failures:
        if args.command == "verify":
            log.error("verification failed: %s", json.dumps(result.aggregates["checks"]))
            return EXIT_VERIFY
        log.error("%d trial(s) did not converge", result.failures)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
