"""Synchronous best-response iteration and convergence diagnostics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .game import ChargingGame, bid_vector, joint_best_response


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: "ConvergenceTrace"):
        super().__init__(message)
        self.trace = trace


# Initialisation modes ---------------------------------------------------------


@dataclass(frozen=True)
class HalfK:
    """Start every user at u_i = K_i / 2, the supremum of its best response."""

    def initial_bids(self, game: ChargingGame) -> np.ndarray:
        return bid_vector(game.aggregate_K / 2.0)


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant initial bid must be positive")

    def initial_bids(self, game: ChargingGame) -> np.ndarray:
        return bid_vector(np.full(game.M, float(self.value)))


@dataclass(frozen=True)
class Explicit:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        bid_vector(self.values)

    def initial_bids(self, game: ChargingGame) -> np.ndarray:
        return bid_vector(self.values, game.M)


@dataclass(frozen=True)
class RandomUniform:
    lo: float
    hi: float
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.lo < self.hi):
            raise ValueError(f"need 0 < lo < hi, got {self.lo}, {self.hi}")

    def initial_bids(self, game: ChargingGame) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return bid_vector(rng.uniform(self.lo, self.hi, size=game.M))


InitMode = Union[HalfK, Constant, Explicit, RandomUniform]


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    init_mode: InitMode = field(default_factory=HalfK)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


# Traces -----------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTrace:
    iterates: np.ndarray  # (n + 1, M), row 0 is the starting point
    residuals: np.ndarray  # (n,), sup-norm step sizes
    part_distances: np.ndarray  # (n + 1,), part metric to the final iterate
    converged: bool
    iterations_used: int
    fixed_point_residual: float = float("nan")  # ||x - F(x)|| at the final iterate

    @classmethod
    def from_iterates(cls, iterates: Sequence[np.ndarray], converged: bool, game: ChargingGame | None = None):
        X = np.array(iterates, dtype=float)
        res = np.max(np.abs(np.diff(X, axis=0)), axis=1) if len(X) > 1 else np.empty(0)
        final = X[-1]
        part = np.max(np.abs(np.log(X / final)), axis=1)
        fpr = float("nan")
        if game is not None:
            fpr = float(np.max(np.abs(final - joint_best_response(final, game))))
        for a in (X, res, part):
            a.setflags(write=False)
        return cls(X, res, part, converged, len(X) - 1, fpr)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


# Core iteration ---------------------------------------------------------------


def iterate_sync(bids, game: ChargingGame) -> np.ndarray:
    """One Jacobi sweep x(n) = F(x(n-1))."""
    return joint_best_response(bids, game)


def solve_nash(game: ChargingGame, settings: SolverSettings | None = None) -> tuple[np.ndarray, ConvergenceTrace]:
    """Iterate best responses from the configured start until the step size drops below tolerance.

    The step residual can alternate in size when users are very unequal, so
    a run only counts as converged once ||x - F(x)|| is below tolerance as
    well. Raises NonConvergenceError (carrying the partial trace) if the cap is hit.
    """
    settings = settings or SolverSettings()
    x = settings.init_mode.initial_bids(game)
    iterates = [x]
    converged = False
    for _ in range(settings.max_iterations):
        nxt = iterate_sync(x, game)
        iterates.append(nxt)
        step = float(np.max(np.abs(nxt - x)))
        x = nxt
        if step < settings.tolerance:
            if float(np.max(np.abs(iterate_sync(x, game) - x))) < settings.tolerance:
                converged = True
                break
    trace = ConvergenceTrace.from_iterates(iterates, converged, game)
    if not converged:
        raise NonConvergenceError(
            f"residual {trace.residuals[-1]:.3e} >= {settings.tolerance:.1e} after {settings.max_iterations} iterations",
            trace,
        )
    return trace.final, trace


def part_metric(x, y) -> float:
    """Thompson's part metric max_i |ln(x_i / y_i)| on the positive orthant."""
    x = bid_vector(x)
    y = bid_vector(y, x.shape[0])
    return float(np.max(np.abs(np.log(x / y))))


def estimate_rate(trace: ConvergenceTrace) -> float:
    """Least-squares slope of ln(residual) against iteration number.

    The terminal residual and any residual already at round-off level are
    dropped; exp(slope) is the average geometric contraction factor.
    """
    if trace.iterates.shape[0] < 4:
        raise ValueError("need at least 4 iterates to estimate a rate")
    res = np.asarray(trace.residuals[:-1])
    floor = 64 * np.finfo(float).eps * float(np.max(np.abs(trace.iterates)))
    idx = np.nonzero(res > floor)[0]
    if idx.size < 2:
        raise ValueError("residuals are at round-off level; rate is undefined")
    slope, _ = np.polyfit(idx.astype(float), np.log(res[idx]), 1)
    return float(slope)


class Monotonicity(enum.Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"
    NON_MONOTONE = "non-monotone"


def check_monotone(trace: ConvergenceTrace) -> Monotonicity:
    """Classify a trajectory; a constant trajectory counts as decreasing."""
    d = np.diff(trace.iterates, axis=0)
    if np.all(d <= 0):
        return Monotonicity.DECREASING
    if np.all(d >= 0):
        return Monotonicity.INCREASING
    return Monotonicity.NON_MONOTONE


def symmetric_equilibrium(K: float, m: int) -> float:
    """x* = K (M - 1) / (2M - 1) when all M users share the same K."""
    return K * (m - 1) / (2 * m - 1)
