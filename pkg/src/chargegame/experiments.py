"""Experiment runners that regenerate the figure-class results as CSV + JSON.

Every CSV row starts with ``experiment,config_hash,seed,M`` followed by the
schema columns for its kind:

* convergence traces: ``start,iter,user,bid,residual``
* sweeps: ``trial,metric,value``

Each experiment also writes ``<name>.json`` holding
``{config_hash, seed, experiment, aggregates}``.  Floats are written with 17
significant digits so files round-trip exactly; with the same config and
seed the output is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .asynchronous import AsyncNetworkModel, run_async
from .config import ExperimentConfig
from .dynamics import (
    ConvergenceTrace,
    NonConvergenceError,
    check_monotone,
    estimate_rate,
    solve_nash,
    symmetric_equilibrium,
)
from .game import ChargingGame, utility_curvature_check
from .oracle import oracle_agreement, property_battery
from .welfare import cooperative_supremum, social_welfare

TRACE_COLUMNS = ["experiment", "config_hash", "seed", "M", "start", "iter", "user", "bid", "residual"]
SWEEP_COLUMNS = ["experiment", "config_hash", "seed", "M", "trial", "metric", "value"]

SWEEP_USERS = list(range(2, 11))
ASYNC_DEFAULT_P = 0.8


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for (seed, keys...), unaffected by evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def sample_game(config: ExperimentConfig, rng: np.random.Generator, m: int | None = None, price_weight: float | None = None) -> ChargingGame:
    """Draw C_i/D_i and h_i uniformly and independently per user (D_i = 1 s)."""
    if m is None:
        m = config.user_counts(2)[0]
    rates = rng.uniform(*config.demand_rate_range, size=m)
    eff = rng.uniform(*config.efficiency_range, size=m)
    lam = config.lambdas[0] if price_weight is None else price_weight
    return ChargingGame.from_rates(rates, eff, config.power_P, lam)


def symmetric_game(config: ExperimentConfig, m: int, price_weight: float | None = None) -> ChargingGame:
    lam = config.lambdas[0] if price_weight is None else price_weight
    return ChargingGame.symmetric(m, config.symmetric_rate, config.symmetric_efficiency, config.power_P, lam)


def network_model(config: ExperimentConfig, m: int, seed: int, default_p: float = ASYNC_DEFAULT_P) -> AsyncNetworkModel:
    p = config.delivery_prob if config.delivery_prob is not None else default_p
    if isinstance(p, (int, float)):
        matrix = np.full((m, m), float(p))
    else:
        matrix = np.asarray(p, dtype=float)
        if matrix.shape != (m, m):
            raise ValueError(f"delivery_prob matrix has shape {matrix.shape}, need {(m, m)}")
    return AsyncNetworkModel(matrix, np.full(m, config.update_prob), seed)


@dataclass
class ExperimentResult:
    name: str
    columns: list[str]
    rows: list[list]
    aggregates: dict
    failures: int = 0  # non-converged trials or failed checks


def _sweep_row(name, cfg, m, trial, metric, value):
    return [name, cfg.config_hash(), cfg.seed, m, trial, metric, value]


def _trace_rows(name, cfg, m, start, trace: ConvergenceTrace):
    rows = []
    for n, x in enumerate(trace.iterates):
        res = trace.residuals[n - 1] if n > 0 else None
        for user, bid in enumerate(x):
            rows.append([name, cfg.config_hash(), cfg.seed, m, start, n, user, bid, res])
    return rows


def _mean_by(rows, key_cols=(3, 5), value_col=6) -> dict:
    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        groups[tuple(r[c] for c in key_cols)].append(float(r[value_col]))
    out: dict[str, dict[str, float]] = {}
    for (m, metric), vals in sorted(groups.items()):
        out.setdefault(metric, {})[str(m)] = float(np.mean(vals))
    return out


# Experiments ------------------------------------------------------------------


def _convergence(name: str, cfg: ExperimentConfig, asynchronous: bool) -> ExperimentResult:
    m = cfg.user_counts(2)[0]
    game = sample_game(cfg, trial_rng(cfg.seed, 0), m)
    rows, summary, failures = [], {}, 0
    for start in cfg.starts:
        settings = cfg.solver(start)
        try:
            if asynchronous:
                x, trace = run_async(game, network_model(cfg, m, cfg.seed), settings)
            else:
                x, trace = solve_nash(game, settings)
        except NonConvergenceError as exc:
            failures += 1
            trace = exc.trace
        rows.extend(_trace_rows(name, cfg, m, start, trace))
        entry = {
            "converged": trace.converged,
            "iterations": trace.iterations_used,
            "equilibrium": trace.final.tolist(),
            "fixed_point_residual": trace.fixed_point_residual,
            "monotonicity": check_monotone(trace).value,
        }
        try:
            entry["rate_slope"] = estimate_rate(trace)
        except ValueError:
            entry["rate_slope"] = None
        summary[start] = entry
    return ExperimentResult(
        name, TRACE_COLUMNS, rows, {"M": m, "K": game.aggregate_K.tolist(), "starts": summary}, failures
    )


def convergence_sync(cfg: ExperimentConfig) -> ExperimentResult:
    return _convergence("convergence-sync", cfg, asynchronous=False)


def convergence_async(cfg: ExperimentConfig) -> ExperimentResult:
    return _convergence("convergence-async", cfg, asynchronous=True)


def iters_vs_size(cfg: ExperimentConfig) -> ExperimentResult:
    name = "iters-vs-size"
    rows, failures = [], 0
    settings = cfg.solver()
    for m in cfg.user_counts(SWEEP_USERS):
        for t in range(cfg.trials):
            game = sample_game(cfg, trial_rng(cfg.seed, m, t), m)
            for metric, run in (
                ("sync_iterations", lambda: solve_nash(game, settings)),
                ("async_iterations", lambda: run_async(game, network_model(cfg, m, _derived_seed(cfg.seed, m, t)), settings)),
            ):
                try:
                    _, trace = run()
                except NonConvergenceError as exc:
                    failures += 1
                    trace = exc.trace
                rows.append(_sweep_row(name, cfg, m, t, metric, trace.iterations_used))
    return ExperimentResult(name, SWEEP_COLUMNS, rows, _mean_by(rows), failures)


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=keys).generate_state(1, np.uint64)[0])


def _equilibria(cfg: ExperimentConfig, m: int, lam: float, symmetric: bool):
    """Yield (trial, game, x*) for one sweep point; a symmetric point has one trial."""
    settings = cfg.solver()
    trials = 1 if symmetric else cfg.trials
    for t in range(trials):
        game = symmetric_game(cfg, m, lam) if symmetric else sample_game(cfg, trial_rng(cfg.seed, m, t), m, lam)
        try:
            x, _ = solve_nash(game, settings)
            yield t, game, x, False
        except NonConvergenceError as exc:
            yield t, game, exc.trace.final, True


def equilibrium_vs_users(cfg: ExperimentConfig) -> ExperimentResult:
    name = "equilibrium-vs-users"
    rows, failures = [], 0
    for m in cfg.user_counts(SWEEP_USERS):
        for t, game, x, failed in _equilibria(cfg, m, cfg.lambdas[0], symmetric=True):
            failures += failed
            rows.append(_sweep_row(name, cfg, m, t, "equilibrium_bid", x[0]))
            rows.append(_sweep_row(name, cfg, m, t, "closed_form", symmetric_equilibrium(game.aggregate_K[0], m)))
    return ExperimentResult(name, SWEEP_COLUMNS, rows, _mean_by(rows), failures)


def _metric(base: str, lam: float, cfg: ExperimentConfig) -> str:
    return base if len(cfg.lambdas) == 1 else f"{base}@lambda={fmt(lam)}"


def welfare_vs_users(cfg: ExperimentConfig) -> ExperimentResult:
    name = "welfare-vs-users"
    rows, failures = [], 0
    for lam in cfg.lambdas:
        for m in cfg.user_counts(SWEEP_USERS):
            for t, game, x, failed in _equilibria(cfg, m, lam, cfg.symmetric):
                failures += failed
                rows.append(_sweep_row(name, cfg, m, t, _metric("welfare", lam, cfg), social_welfare(x, game)))
    return ExperimentResult(name, SWEEP_COLUMNS, rows, _mean_by(rows), failures)


def poa_vs_users(cfg: ExperimentConfig) -> ExperimentResult:
    name = "poa-vs-users"
    rows, failures = [], 0
    for m in cfg.user_counts(SWEEP_USERS):
        for t, game, x, failed in _equilibria(cfg, m, cfg.lambdas[0], cfg.symmetric):
            failures += failed
            rows.append(_sweep_row(name, cfg, m, t, "poa", cooperative_supremum(game) / social_welfare(x, game)))
            if cfg.symmetric:
                rows.append(_sweep_row(name, cfg, m, t, "closed_form", (2 * m - 1) / m))
    return ExperimentResult(name, SWEEP_COLUMNS, rows, _mean_by(rows), failures)


def verify(cfg: ExperimentConfig) -> ExperimentResult:
    """Property battery, oracle agreement and concavity spot checks."""
    name = "verify"
    battery = property_battery(trials=cfg.trials, seed=cfg.seed)
    oracle_err = oracle_agreement(100, cfg.seed)
    rng = trial_rng(cfg.seed, 1)
    worst_curv = -np.inf
    for _ in range(cfg.trials):
        game = sample_game(cfg, rng, int(rng.integers(2, 9)))
        x = game.aggregate_K * rng.uniform(0.05, 2.0, size=game.M)
        i = int(rng.integers(game.M))
        worst_curv = max(worst_curv, utility_curvature_check(i, x, game, step=1e-4 * x[i]))
    checks = {
        "monotonicity_violations": (battery.monotonicity_violations, battery.monotonicity_violations == 0),
        "scaling_violations": (battery.scaling_violations, battery.scaling_violations == 0),
        "oracle_max_error": (oracle_err, oracle_err < 1e-5),
        "max_curvature": (worst_curv, worst_curv < 0),
    }
    rows = [_sweep_row(name, cfg, "", 0, k, v) for k, (v, _) in checks.items()]
    aggregates = {
        "checks": {k: {"value": v, "passed": bool(ok)} for k, (v, ok) in checks.items()},
        "battery": battery.to_dict(),
    }
    failures = sum(not ok for _, ok in checks.values())
    return ExperimentResult(name, SWEEP_COLUMNS, rows, aggregates, failures)


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "convergence-sync": convergence_sync,
    "convergence-async": convergence_async,
    "iters-vs-size": iters_vs_size,
    "equilibrium-vs-users": equilibrium_vs_users,
    "welfare-vs-users": welfare_vs_users,
    "poa-vs-users": poa_vs_users,
    "verify": verify,
}


# Output -----------------------------------------------------------------------


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def render_summary(result: ExperimentResult, cfg: ExperimentConfig) -> str:
    summary = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "experiment": result.name,
        "aggregates": result.aggregates,
        "config": cfg.to_dict(),
    }
    return json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n"


def run_experiment(name: str, cfg: ExperimentConfig, out_dir: str | Path) -> tuple[ExperimentResult, list[Path]]:
    """Run ``name`` and write ``<out_dir>/<name>.csv`` and ``<name>.json``."""
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    result = EXPERIMENTS[name](cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
    csv_path.write_text(render_csv(result))
    json_path.write_text(render_summary(result, cfg))
    return result, [csv_path, json_path]
