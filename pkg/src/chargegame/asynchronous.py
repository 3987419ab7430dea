"""Round-based simulation of totally asynchronous best-response updating.

Each round every directed link j -> i independently delivers j's current bid
with probability ``delivery_prob[j, i]``; then each user that is scheduled to
update (Bernoulli draw, or a deterministic schedule) recomputes its bid from
whatever it last heard from the others.  Users that do not update keep their
previous bid.

Random draws for round n come from a stream derived from ``(seed, n)``, so a
run is reproducible no matter how rounds are replayed or interleaved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .dynamics import ConvergenceTrace, NonConvergenceError, SolverSettings
from .game import ChargingGame, best_response_value, bid_vector, joint_best_response


class Schedule(Protocol):
    """Deterministic update pattern: which users recompute in round n (1-based)."""

    min_rate: float

    def __call__(self, round_index: int, m: int) -> np.ndarray: ...


@dataclass(frozen=True)
class RoundRobin:
    """One user per round, cycling 0, 1, ..., M-1 (Gauss-Seidel order)."""

    m: int

    @property
    def min_rate(self) -> float:
        return 1.0 / self.m

    def __call__(self, round_index: int, m: int) -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        mask[(round_index - 1) % m] = True
        return mask


@dataclass(frozen=True)
class FixedSchedule:
    """Explicit per-round masks, repeated cyclically."""

    masks: tuple[tuple[bool, ...], ...]

    @property
    def min_rate(self) -> float:
        counts = np.array(self.masks, dtype=bool).sum(axis=0)
        return max(float(counts.min()), 1.0) / len(self.masks)

    def __call__(self, round_index: int, m: int) -> np.ndarray:
        return np.array(self.masks[(round_index - 1) % len(self.masks)], dtype=bool)


@dataclass(frozen=True)
class AsyncNetworkModel:
    delivery_prob: np.ndarray  # [j, i] = P(j's bid reaches i in a round); diagonal ignored
    update_prob: np.ndarray
    seed: int = 0
    schedule: Schedule | None = None

    def __post_init__(self):
        p = np.array(self.delivery_prob, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"delivery_prob must be square, got shape {p.shape}")
        m = p.shape[0]
        np.fill_diagonal(p, 1.0)
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("delivery probabilities must lie in (0, 1]")
        q = np.broadcast_to(np.asarray(self.update_prob, dtype=float), (m,)).copy()
        if np.any(q <= 0) or np.any(q > 1):
            raise ValueError("update probabilities must lie in (0, 1]")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "delivery_prob", p)
        object.__setattr__(self, "update_prob", q)
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform(cls, m: int, p: float = 0.8, seed: int = 0, update_prob: float = 1.0, schedule=None):
        return cls(np.full((m, m), p), np.full(m, update_prob), seed, schedule)

    @property
    def m(self) -> int:
        return self.delivery_prob.shape[0]

    @property
    def lossless(self) -> bool:
        return self.schedule is None and bool(np.all(self.delivery_prob == 1) and np.all(self.update_prob == 1))

    @property
    def window(self) -> int:
        """Rounds W compared by the convergence test: 2 * ceil(1 / slowest event rate)."""
        if self.lossless:
            return 1
        rates = [float(self.delivery_prob.min())]
        rates.append(self.schedule.min_rate if self.schedule is not None else float(self.update_prob.min()))
        return 2 * math.ceil(1.0 / min(rates))

    def round_rng(self, round_index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(round_index,)))


@dataclass(frozen=True)
class MailboxState:
    """What each user knows about the others.

    ``last_received[i, j]`` is the freshest bid of j that has reached i,
    ``stamp[i, j]`` the round in which j emitted it, and ``age[i, j]`` the
    number of rounds since the last successful delivery on that link.
    ``bid_round[j]`` is the round in which j produced its current bid.
    """

    last_received: np.ndarray
    age: np.ndarray
    stamp: np.ndarray
    bid_round: np.ndarray
    round_index: int = 0

    @classmethod
    def initial(cls, bids) -> "MailboxState":
        x = bid_vector(bids)
        m = x.shape[0]
        return cls(
            np.tile(x, (m, 1)),
            np.zeros((m, m), dtype=np.int64),
            np.zeros((m, m), dtype=np.int64),
            np.zeros(m, dtype=np.int64),
            0,
        )


def step_async(
    state: MailboxState,
    bids,
    model: AsyncNetworkModel,
    game: ChargingGame,
    rng: np.random.Generator | None = None,
) -> tuple[MailboxState, np.ndarray]:
    """Advance the network by one round (deliver, then update)."""
    x = bid_vector(bids, game.M)
    m = game.M
    if model.m != m or state.last_received.shape != (m, m):
        raise ValueError("model, mailbox and game disagree on the number of users")
    n = state.round_index + 1
    if rng is None:
        rng = model.round_rng(n)
    # fixed draw layout: link draws then update draws, both always consumed
    link_draw = rng.random((m, m))
    update_draw = rng.random(m)

    delivered = (link_draw < model.delivery_prob).T  # [i, j]: j -> i arrived
    np.fill_diagonal(delivered, True)
    mailbox = np.where(delivered, x[np.newaxis, :], state.last_received)
    stamp = np.where(delivered, state.bid_round[np.newaxis, :], state.stamp)
    age = np.where(delivered, 0, state.age + 1)

    if model.schedule is not None:
        updating = np.asarray(model.schedule(n, m), dtype=bool)
    else:
        updating = update_draw < model.update_prob

    new_x = x.copy()
    bid_round = state.bid_round.copy()
    if updating.any():
        others = mailbox.copy()
        np.fill_diagonal(others, 0.0)
        S = others.sum(axis=1)
        new_x[updating] = best_response_value(game.aggregate_K[updating], S[updating])
        bid_round[updating] = n
    new_x.setflags(write=False)
    return MailboxState(mailbox, age, stamp, bid_round, n), new_x


def run_async(
    game: ChargingGame,
    model: AsyncNetworkModel,
    settings: SolverSettings | None = None,
    on_step: Callable[[MailboxState, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Run rounds until the bids have settled, or raise NonConvergenceError.

    Settled means: over the last W rounds the bids moved less than the
    tolerance, the last single round moved less than the tolerance, and every
    mailbox entry is within the tolerance of its owner's current bid. As in
    the synchronous solver, ||x - F(x)|| must also be below the tolerance.
    """
    settings = settings or SolverSettings()
    x = settings.init_mode.initial_bids(game)
    state = MailboxState.initial(x)
    W = model.window
    iterates = [x]
    converged = False
    for _ in range(settings.max_iterations):
        state, x = step_async(state, x, model, game)
        iterates.append(x)
        if on_step is not None:
            on_step(state, x)
        if len(iterates) <= W:
            continue
        tol = settings.tolerance
        if (
            np.max(np.abs(x - iterates[-1 - W])) < tol
            and np.max(np.abs(x - iterates[-2])) < tol
            and np.max(np.abs(state.last_received - x[np.newaxis, :])) < tol
            and np.max(np.abs(joint_best_response(x, game) - x)) < tol
        ):
            converged = True
            break
    trace = ConvergenceTrace.from_iterates(iterates, converged, game)
    if not converged:
        raise NonConvergenceError(f"asynchronous run did not settle within {settings.max_iterations} rounds", trace)
    return trace.final, trace
