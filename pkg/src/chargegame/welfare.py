"""Social welfare, the cooperative benchmark and the price of anarchy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._search import golden_max
from .dynamics import SolverSettings, solve_nash
from .game import ChargingGame, bid_vector


class UndefinedPoAError(ValueError):
    """Equilibrium welfare is not positive, so the ratio is meaningless."""


def social_welfare(bids, game: ChargingGame) -> float:
    """Sum of utilities: lambda P (sum K_i x_i - sum x_i^2) / sum x_j."""
    x = bid_vector(bids, game.M)
    lp = game.price_weight_lambda * game.transmit_power_P
    return float(lp * (game.aggregate_K @ x - x @ x) / x.sum())


def cooperative_supremum(game: ChargingGame) -> float:
    """lambda P max_i K_i.

    Writing x = t w with w on the simplex gives welfare
    lambda P (K.w - t |w|^2), which approaches lambda P max K as t -> 0 with
    all weight on the largest K.  The bound is never attained by positive bids.
    """
    return float(game.price_weight_lambda * game.transmit_power_P * np.max(game.aggregate_K))


@dataclass(frozen=True)
class CooperativeOptimum:
    bids: np.ndarray
    value: float
    stalled: bool = False


def constrained_cooperative_optimum(
    game: ChargingGame,
    box_lo: float,
    box_hi: float,
    starts: int = 20,
    seed: int = 0,
    objective_tol: float = 1e-8,
    max_sweeps: int = 500,
) -> CooperativeOptimum:
    """Maximise welfare over [box_lo, box_hi]^M by multi-start coordinate ascent.

    Welfare is unimodal in each coordinate (the derivative's numerator is a
    downward quadratic), so each coordinate step is an exact golden-section
    line search.  Starts are the box corners at lo/hi extremes plus random
    points; the best result wins.
    """
    if not (0 < box_lo <= box_hi):
        raise ValueError(f"need 0 < box_lo <= box_hi, got {box_lo}, {box_hi}")
    m = game.M
    if box_lo == box_hi:
        x = np.full(m, float(box_lo))
        return CooperativeOptimum(bid_vector(x), social_welfare(x, game))

    K = game.aggregate_K
    rng = np.random.default_rng(seed)
    inits = [np.full(m, box_lo), np.full(m, box_hi)]
    spike = np.full(m, box_lo)
    spike[int(np.argmax(K))] = min(box_hi, max(box_lo, float(np.max(K)) / 2))
    inits.append(spike)
    while len(inits) < starts:
        inits.append(rng.uniform(box_lo, box_hi, size=m))

    best: CooperativeOptimum | None = None
    for x0 in inits[:max(starts, 1)]:
        x = np.array(x0, dtype=float)
        value = social_welfare(x, game)
        stalled = True
        for _ in range(max_sweeps):
            prev = value
            for i in range(m):
                a = K @ x - K[i] * x[i] - (x @ x - x[i] ** 2)
                c = x.sum() - x[i]
                xi, _ = golden_max(lambda t: (a + K[i] * t - t * t) / (c + t), box_lo, box_hi, xtol=1e-13)
                x[i] = xi
            value = social_welfare(x, game)
            if abs(value - prev) < objective_tol:
                stalled = False
                break
        result = CooperativeOptimum(bid_vector(x), value, stalled)
        if best is None or result.value > best.value:
            best = result
    assert best is not None
    return best


def price_of_anarchy(game: ChargingGame, settings: SolverSettings | None = None) -> float:
    x_star, _ = solve_nash(game, settings)
    w = social_welfare(x_star, game)
    if w <= 0:
        raise UndefinedPoAError(f"equilibrium welfare {w} is not positive")
    return cooperative_supremum(game) / w


@dataclass(frozen=True)
class WelfareReport:
    equilibrium_bids: np.ndarray
    equilibrium_welfare: float
    cooperative_supremum: float
    constrained_optimum: float
    constrained_argmax: np.ndarray
    constrained_stalled: bool
    poa: float

    def to_dict(self) -> dict:
        return {
            "equilibrium_bids": self.equilibrium_bids.tolist(),
            "equilibrium_welfare": self.equilibrium_welfare,
            "cooperative_supremum": self.cooperative_supremum,
            "constrained_optimum": self.constrained_optimum,
            "constrained_argmax": self.constrained_argmax.tolist(),
            "constrained_stalled": self.constrained_stalled,
            "poa": self.poa,
        }


def welfare_report(
    game: ChargingGame,
    settings: SolverSettings | None = None,
    box: tuple[float, float] | None = None,
) -> WelfareReport:
    """Equilibrium welfare, both cooperative benchmarks and the PoA for one game.

    The default box is [1e-3 max K, max K].
    """
    x_star, _ = solve_nash(game, settings)
    w = social_welfare(x_star, game)
    kmax = float(np.max(game.aggregate_K))
    lo, hi = box if box is not None else (1e-3 * kmax, kmax)
    opt = constrained_cooperative_optimum(game, lo, hi)
    sup = cooperative_supremum(game)
    if w <= 0:
        raise UndefinedPoAError(f"equilibrium welfare {w} is not positive")
    return WelfareReport(x_star, w, sup, opt.value, opt.bids, opt.stalled, sup / w)
