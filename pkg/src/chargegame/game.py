"""Game model for proportional-share wireless charging.

A single transmitter with power ``P`` splits its output among ``M`` users in
proportion to their unit-price bids.  User ``i`` values its charging rate
relative to the rate it needs (``C_i / D_i``) and pays ``lambda * x_i`` per
unit of allocated power.  After construction everything the dynamics need is
captured by the aggregate coefficient ``K_i = D_i h_i / (lambda C_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike


class InvalidBidError(ValueError):
    """Raised when a bid vector leaves the open positive orthant."""


@dataclass(frozen=True)
class UserProfile:
    demand_C: float  # energy needed, J
    deadline_D: float  # charging window, s
    efficiency_h: float  # fraction of transmitted power that arrives

    def __post_init__(self):
        if not (np.isfinite(self.demand_C) and self.demand_C > 0):
            raise ValueError(f"demand_C must be positive, got {self.demand_C}")
        if not (np.isfinite(self.deadline_D) and self.deadline_D > 0):
            raise ValueError(f"deadline_D must be positive, got {self.deadline_D}")
        if not (0 < self.efficiency_h <= 1):
            raise ValueError(f"efficiency_h must lie in (0, 1], got {self.efficiency_h}")

    @property
    def required_rate(self) -> float:
        """Minimum charging rate C/D (W) that finishes on time."""
        return self.demand_C / self.deadline_D


@dataclass(frozen=True)
class ChargingGame:
    transmit_power_P: float
    price_weight_lambda: float
    users: tuple[UserProfile, ...]
    aggregate_K: np.ndarray = field(init=False, repr=False, compare=False)
    efficiency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) < 2:
            raise ValueError("a charging game needs at least two users")
        if not (np.isfinite(self.transmit_power_P) and self.transmit_power_P > 0):
            raise ValueError(f"transmit power must be positive, got {self.transmit_power_P}")
        if not (np.isfinite(self.price_weight_lambda) and self.price_weight_lambda > 0):
            raise ValueError(f"price weight must be positive, got {self.price_weight_lambda}")
        K = np.array(
            [u.deadline_D * u.efficiency_h / (self.price_weight_lambda * u.demand_C) for u in self.users]
        )
        h = np.array([u.efficiency_h for u in self.users])
        K.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "aggregate_K", K)
        object.__setattr__(self, "efficiency", h)

    @property
    def M(self) -> int:
        return len(self.users)

    @classmethod
    def from_rates(
        cls,
        rates: Sequence[float],
        efficiencies: Sequence[float],
        power: float = 20.0,
        price_weight: float = 1.0,
    ) -> "ChargingGame":
        """Build a game from required rates C_i/D_i, taking D_i = 1 s."""
        if len(rates) != len(efficiencies):
            raise ValueError("rates and efficiencies differ in length")
        users = tuple(UserProfile(float(r), 1.0, float(h)) for r, h in zip(rates, efficiencies))
        return cls(float(power), float(price_weight), users)

    @classmethod
    def symmetric(
        cls, m: int, rate: float = 1.2, efficiency: float = 0.15, power: float = 20.0, price_weight: float = 1.0
    ) -> "ChargingGame":
        return cls.from_rates([rate] * m, [efficiency] * m, power, price_weight)

    @classmethod
    def from_aggregates(cls, K: Sequence[float], power: float = 20.0, price_weight: float = 1.0) -> "ChargingGame":
        """Build a game whose users have the given K_i (with h_i = D_i = 1)."""
        users = tuple(UserProfile(1.0 / (price_weight * float(k)), 1.0, 1.0) for k in K)
        return cls(float(power), float(price_weight), users)

    def with_power(self, power: float) -> "ChargingGame":
        return ChargingGame(power, self.price_weight_lambda, self.users)

    def with_price_weight(self, price_weight: float) -> "ChargingGame":
        return ChargingGame(self.transmit_power_P, price_weight, self.users)


@dataclass(frozen=True)
class AllocationReport:
    received_power_y: np.ndarray
    satisfaction_s: np.ndarray
    utility_U: np.ndarray


def bid_vector(values: ArrayLike, m: int | None = None) -> np.ndarray:
    """Validated, read-only copy of a bid vector.

    Bids live in the open set x > 0, so zero, negative and non-finite entries
    are rejected rather than clipped.
    """
    x = np.array(values, dtype=float)
    if x.ndim != 1:
        raise InvalidBidError(f"bids must be one-dimensional, got shape {x.shape}")
    if m is not None and x.shape[0] != m:
        raise InvalidBidError(f"expected {m} bids, got {x.shape[0]}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InvalidBidError(f"bids must be finite and strictly positive: {x}")
    x.setflags(write=False)
    return x


def _check(bids: ArrayLike, game: ChargingGame) -> np.ndarray:
    return bid_vector(bids, game.M)


def _check_index(i: int, game: ChargingGame) -> None:
    if not 0 <= i < game.M:
        raise IndexError(f"user index {i} out of range for M={game.M}")


def opponent_sums(bids: np.ndarray) -> np.ndarray:
    """S_i = sum_{j != i} x_j for every i.

    Summed with the own entry masked out (not total minus own) so that
    componentwise-larger inputs never give smaller sums after rounding.
    """
    m = bids.shape[0]
    others = np.broadcast_to(bids, (m, m)).copy()
    np.fill_diagonal(others, 0.0)
    return others.sum(axis=1)


def allocate_power(bids: ArrayLike, game: ChargingGame) -> np.ndarray:
    """Received power y_i = x_i P h_i / sum_j x_j (W)."""
    x = _check(bids, game)
    return x * game.transmit_power_P * game.efficiency / x.sum()


def allocation_report(bids: ArrayLike, game: ChargingGame) -> AllocationReport:
    x = _check(bids, game)
    y = allocate_power(x, game)
    rates = np.array([u.required_rate for u in game.users])
    return AllocationReport(y, y / rates, utilities(x, game))


def utilities(bids: ArrayLike, game: ChargingGame) -> np.ndarray:
    x = _check(bids, game)
    lp = game.price_weight_lambda * game.transmit_power_P
    return lp * (game.aggregate_K * x - x * x) / x.sum()


def utility(i: int, bids: ArrayLike, game: ChargingGame) -> float:
    """U_i = lambda P (K_i x_i - x_i^2) / sum_j x_j."""
    _check_index(i, game)
    x = _check(bids, game)
    xi = x[i]
    return float(
        game.price_weight_lambda * game.transmit_power_P * (game.aggregate_K[i] * xi - xi * xi) / x.sum()
    )


def best_response_value(K: ArrayLike, S: ArrayLike) -> np.ndarray:
    """Closed-form maximiser sqrt(S^2 + K S) - S, evaluated as K / (sqrt(1 + K/S) + 1).

    The rationalised form has no subtraction, so it stays accurate for
    S >> K, and every step is monotone so rounding never breaks the
    ordering F(x) <= F(y) for x <= y.
    """
    K = np.asarray(K, dtype=float)
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise InvalidBidError("sum of opponents' bids must be positive")
    return K / (np.sqrt(1.0 + K / S) + 1.0)


def best_response(i: int, bids: ArrayLike, game: ChargingGame) -> float:
    _check_index(i, game)
    x = _check(bids, game)
    return float(best_response_value(game.aggregate_K[i], opponent_sums(x)[i]))


def joint_best_response(bids: ArrayLike, game: ChargingGame) -> np.ndarray:
    """Every user's best response to the same input profile (a Jacobi sweep)."""
    x = _check(bids, game)
    out = best_response_value(game.aggregate_K, opponent_sums(x))
    out.setflags(write=False)
    return out


def utility_curvature_check(i: int, bids: ArrayLike, game: ChargingGame, step: float = 1e-4) -> float:
    """Centred second difference of U_i in x_i.  Negative by strict concavity."""
    _check_index(i, game)
    x = np.array(_check(bids, game))
    if step <= 0 or x[i] - step <= 0:
        raise ValueError(f"step {step} too large for x_{i} = {x[i]}")
    vals = []
    for d in (-step, 0.0, step):
        y = x.copy()
        y[i] += d
        vals.append(utility(i, y, game))
    return (vals[0] - 2.0 * vals[1] + vals[2]) / (step * step)


def utility_second_derivative(i: int, bids: ArrayLike, game: ChargingGame) -> float:
    """Analytic d^2 U_i / d x_i^2 = -2 lambda P S (S + K_i) / (sum x)^3."""
    _check_index(i, game)
    x = _check(bids, game)
    S = opponent_sums(x)[i]
    lp = game.price_weight_lambda * game.transmit_power_P
    return float(-2.0 * lp * S * (S + game.aggregate_K[i]) / x.sum() ** 3)
