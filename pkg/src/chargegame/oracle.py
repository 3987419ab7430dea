"""Brute-force references for checking the closed-form game math.

Nothing here calls the closed-form best response: utilities are evaluated
from the raw demand/deadline/efficiency parameters and maximised by search,
so agreement with :mod:`chargegame.game` is a genuine cross-check.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ._search import golden_max
from .game import ChargingGame, bid_vector, joint_best_response, best_response


class GridEndpointError(RuntimeError):
    """The grid maximiser landed on an endpoint, so the grid misses the optimum."""


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    steps: int = 10_000

    def __post_init__(self):
        if not (0 < self.lo < self.hi):
            raise ValueError(f"need 0 < lo < hi, got lo={self.lo}, hi={self.hi}")
        if self.steps < 100:
            raise ValueError(f"grid needs at least 100 steps, got {self.steps}")

    @classmethod
    def default_for(cls, K_i: float) -> "GridSpec":
        return cls(1e-4 * K_i, K_i, 10_000)


def raw_utility(i: int, xi: np.ndarray | float, others_sum: float, game: ChargingGame) -> np.ndarray:
    """Satisfaction minus payment, straight from the model parameters."""
    u = game.users[i]
    P, lam = game.transmit_power_P, game.price_weight_lambda
    total = xi + others_sum
    return u.deadline_D * P * u.efficiency_h * xi / (u.demand_C * total) - lam * P * xi**2 / total


def brute_force_best_response(i: int, bids, game: ChargingGame, grid: GridSpec | None = None) -> float:
    x = bid_vector(bids, game.M)
    if grid is None:
        grid = GridSpec.default_for(float(game.aggregate_K[i]))
    others = float(np.delete(x, i).sum())
    xs = np.linspace(grid.lo, grid.hi, grid.steps)
    vals = raw_utility(i, xs, others, game)
    k = int(np.argmax(vals))
    if k == 0 or k == grid.steps - 1:
        raise GridEndpointError(f"argmax at grid endpoint {xs[k]:.6g}; widen [{grid.lo}, {grid.hi}]")
    best, _ = golden_max(lambda t: float(raw_utility(i, t, others, game)), xs[k - 1], xs[k + 1], xtol=1e-14)
    return best


def random_game(rng: np.random.Generator, m_range: tuple[int, int] = (2, 8)) -> ChargingGame:
    """Game with K_i log-uniform on [1e-2, 1e2] and random P, lambda."""
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    K = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=m))
    return ChargingGame.from_aggregates(K, power=float(rng.uniform(1, 50)), price_weight=float(rng.uniform(0.2, 5)))


@dataclass
class BatteryReport:
    trials: int
    seed: int
    monotonicity_violations: int = 0
    scaling_violations: int = 0
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.monotonicity_violations == 0 and self.scaling_violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def property_battery(
    game_sampler: Callable[[np.random.Generator], ChargingGame] | None = None,
    trials: int = 10_000,
    seed: int = 0,
    max_counterexamples: int = 20,
) -> BatteryReport:
    """Check monotonicity and strict sub-homogeneity of the joint best response.

    Each trial draws a game, a bid vector x, a dominating vector y >= x (some
    coordinates left equal) and a scale alpha in [0.01, 0.99], then checks
    F(x) <= F(y), F(alpha x) > alpha F(x) and F(x)/alpha > F(x/alpha).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = game_sampler or random_game
    rng = np.random.default_rng(seed)
    report = BatteryReport(trials=trials, seed=seed)

    def record(kind: str, trial: int, game: ChargingGame, **vectors):
        if len(report.counterexamples) < max_counterexamples:
            entry = {"kind": kind, "trial": trial, "K": game.aggregate_K.tolist()}
            entry.update({k: np.asarray(v).tolist() if not np.isscalar(v) else v for k, v in vectors.items()})
            report.counterexamples.append(entry)

    for t in range(trials):
        game = sampler(rng)
        m = game.M
        scale = float(np.max(game.aggregate_K))
        x = scale * np.exp(rng.uniform(np.log(1e-3), np.log(1e2), size=m))
        bump = rng.uniform(1.0, 3.0, size=m)
        bump[rng.random(m) < 0.3] = 1.0
        y = x * bump
        alpha = float(rng.uniform(0.01, 0.99))

        fx, fy = joint_best_response(x, game), joint_best_response(y, game)
        if np.any(fx > fy):
            report.monotonicity_violations += 1
            record("P1.1", t, game, x=x, y=y)

        f_ax = joint_best_response(alpha * x, game)
        f_x_over_a = joint_best_response(x / alpha, game)
        if not (np.all(f_ax > alpha * fx) and np.all(fx / alpha > f_x_over_a)):
            report.scaling_violations += 1
            record("P1.2", t, game, x=x, alpha=alpha)
    return report


def oracle_agreement(instances: int = 100, seed: int = 0) -> float:
    """Largest |closed form - brute force| over random single-user problems."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        game = random_game(rng, (2, 5))
        x = game.aggregate_K * np.exp(rng.uniform(np.log(1e-2), np.log(1e1), size=game.M))
        i = int(rng.integers(game.M))
        worst = max(worst, abs(brute_force_best_response(i, x, game) - best_response(i, x, game)))
    return worst


def grid_cooperative_optimum(game: ChargingGame, box_lo: float, box_hi: float, steps: int = 200) -> tuple[np.ndarray, float]:
    """Exhaustive search over a (steps+1)^M lattice of the box.  Only sensible for M <= 3."""
    m = game.M
    axis = np.linspace(box_lo, box_hi, steps + 1)
    K = np.asarray(game.aggregate_K)
    lp = game.price_weight_lambda * game.transmit_power_P
    best_val, best_x = -np.inf, None
    # sweep the first coordinate in a loop to bound memory
    rest = np.stack(np.meshgrid(*([axis] * (m - 1)), indexing="ij"), axis=-1).reshape(-1, m - 1)
    rest_lin = rest @ K[1:]
    rest_sq = np.einsum("ij,ij->i", rest, rest)
    rest_sum = rest.sum(axis=1)
    for x0 in axis:
        vals = lp * (K[0] * x0 + rest_lin - x0 * x0 - rest_sq) / (x0 + rest_sum)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_x = np.concatenate([[x0], rest[k]])
    return bid_vector(best_x), best_val
