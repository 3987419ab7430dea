"""Noncooperative power allocation for multi-user wireless charging."""

from .asynchronous import AsyncNetworkModel, MailboxState, RoundRobin, run_async, step_async
from .dynamics import (
    ConvergenceTrace,
    NonConvergenceError,
    SolverSettings,
    check_monotone,
    estimate_rate,
    iterate_sync,
    part_metric,
    solve_nash,
)
from .game import (
    ChargingGame,
    InvalidBidError,
    UserProfile,
    allocate_power,
    best_response,
    bid_vector,
    joint_best_response,
    utility,
    utility_curvature_check,
)
from .welfare import (
    constrained_cooperative_optimum,
    cooperative_supremum,
    price_of_anarchy,
    social_welfare,
    welfare_report,
)

__version__ = "0.1.0"
