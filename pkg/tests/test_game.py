import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargegame.game import (
    ChargingGame,
    InvalidBidError,
    UserProfile,
    allocate_power,
    allocation_report,
    best_response,
    best_response_value,
    bid_vector,
    joint_best_response,
    utility,
    utility_curvature_check,
    utility_second_derivative,
)
from chargegame.oracle import brute_force_best_response

pos = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


def two_user(h=(0.15, 0.15), power=20.0):
    return ChargingGame.from_rates([1.0, 1.0], list(h), power=power)


# --- data model -----------------------------------------------------------------


def test_aggregate_K_matches_definition():
    users = (UserProfile(3.0, 2.0, 0.15), UserProfile(1.5, 4.0, 0.11))
    g = ChargingGame(20.0, 0.5, users)
    assert g.aggregate_K[0] == 2.0 * 0.15 / (0.5 * 3.0)
    assert g.aggregate_K[1] == 4.0 * 0.11 / (0.5 * 1.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(demand_C=0.0, deadline_D=1.0, efficiency_h=0.5),
        dict(demand_C=1.0, deadline_D=-1.0, efficiency_h=0.5),
        dict(demand_C=1.0, deadline_D=1.0, efficiency_h=0.0),
        dict(demand_C=1.0, deadline_D=1.0, efficiency_h=1.2),
    ],
)
def test_user_profile_rejects_out_of_range(kwargs):
    with pytest.raises(ValueError):
        UserProfile(**kwargs)


def test_game_needs_two_users():
    with pytest.raises(ValueError):
        ChargingGame(20.0, 1.0, (UserProfile(1, 1, 0.1),))


@pytest.mark.parametrize("bad", [[1.0, 0.0], [1.0, -2.0], [1.0, float("nan")], [1.0, float("inf")], [[1.0, 2.0]]])
def test_bid_vector_rejects_boundary(bad):
    with pytest.raises(InvalidBidError):
        bid_vector(bad)


def test_bid_vector_dimension_mismatch():
    with pytest.raises(InvalidBidError):
        allocate_power([1.0, 2.0, 3.0], two_user())


# --- allocation -----------------------------------------------------------------


@pytest.mark.parametrize("c", [1e-6, 0.3, 7.0])
def test_allocation_symmetric(c):
    np.testing.assert_allclose(allocate_power([c, c], two_user()), [1.5, 1.5], rtol=1e-15)


def test_allocation_hand_values():
    np.testing.assert_allclose(allocate_power([1, 3], two_user()), [0.75, 2.25], rtol=1e-15)
    g = ChargingGame.from_rates([1, 1, 1], [0.11, 0.15, 0.19])
    np.testing.assert_allclose(allocate_power([1, 1, 2], g), [0.55, 0.75, 1.90], rtol=1e-14)


@given(st.lists(pos, min_size=2, max_size=12), st.floats(0.5, 100))
def test_allocation_conserves_power(bids, power):
    m = len(bids)
    g = ChargingGame.from_rates([1.0] * m, np.linspace(0.1, 0.9, m), power=power)
    y = allocate_power(bids, g)
    assert math.isclose(np.sum(y / g.efficiency), power, rel_tol=1e-12)


def test_satisfaction_is_rate_over_required_rate():
    g = ChargingGame.from_rates([1.2, 2.5], [0.15, 0.11])
    rep = allocation_report([0.3, 0.5], g)
    np.testing.assert_allclose(rep.satisfaction_s, rep.received_power_y / np.array([1.2, 2.5]))


# --- utility --------------------------------------------------------------------


def test_utility_hand_value():
    g = ChargingGame.from_aggregates([1.0, 1.0])
    assert utility(0, [1 / 3, 1 / 3], g) == pytest.approx(20 / 3, rel=1e-14)
    # symmetric-equilibrium cross-check lambda P K / (2M - 1)
    lam, P, K, M = 1.0, 20.0, 1.0, 2
    assert utility(0, [1 / 3, 1 / 3], g) == pytest.approx(lam * P * K / (2 * M - 1), rel=1e-14)


def test_utility_zero_when_bid_equals_K():
    g = ChargingGame.from_aggregates([0.7, 2.0, 0.3])
    assert utility(1, [0.5, g.aggregate_K[1], 0.1], g) == pytest.approx(0.0, abs=1e-15)


def test_utility_linear_in_power():
    g = ChargingGame.from_rates([1.2, 2.0], [0.15, 0.11])
    assert utility(0, [0.02, 0.05], g.with_power(40.0)) == pytest.approx(2 * utility(0, [0.02, 0.05], g), rel=1e-14)


def test_utility_matches_raw_form():
    g = ChargingGame(20.0, 0.7, (UserProfile(3.0, 2.0, 0.15), UserProfile(1.5, 4.0, 0.11)))
    x = np.array([0.05, 0.2])
    u = g.users[0]
    raw = u.deadline_D * 20 * u.efficiency_h * x[0] / (u.demand_C * x.sum()) - 0.7 * 20 * x[0] ** 2 / x.sum()
    assert utility(0, x, g) == pytest.approx(raw, rel=1e-13)


def test_utility_index_checked():
    with pytest.raises(IndexError):
        utility(2, [1.0, 1.0], two_user())


# --- best response --------------------------------------------------------------


def test_best_response_k1_s1():
    g = ChargingGame.from_aggregates([1.0, 1.0])
    assert best_response(0, [5.0, 1.0], g) == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    # frozen from the brute-force maximiser (grid 1e-4..1, 1e4 steps + golden refinement)
    assert best_response(0, [5.0, 1.0], g) == pytest.approx(brute_force_best_response(0, [5.0, 1.0], g), abs=1e-5)


@pytest.mark.parametrize("K", [0.05, 1.0, 30.0])
def test_best_response_limits(K):
    assert best_response_value(K, 1e12 * K) == pytest.approx(K / 2, rel=1e-11)
    assert best_response_value(K, 1e-14 * K) < 1e-6 * K


def test_best_response_large_S_has_no_cancellation():
    # the textbook sqrt(S^2 + K S) - S loses every digit here
    K, S = 1.0, 1e9
    exact = K * S / (math.sqrt(S * S + K * S) + S)
    assert best_response_value(K, S) == pytest.approx(exact, rel=1e-15)


def test_best_response_rejects_nonpositive_S():
    with pytest.raises(InvalidBidError):
        best_response_value(1.0, 0.0)


@settings(max_examples=300)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_best_response_strictly_inside_zero_half_K(K, S):
    f = float(best_response_value(K, S))
    assert 0 < f < K / 2


@settings(max_examples=300)
@given(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2))
def test_best_response_is_stationary_point(K, S):
    # dU/dx = 0  <=>  x^2 + 2 x S - K S = 0
    x = float(best_response_value(K, S))
    assert x * x + 2 * x * S == pytest.approx(K * S, rel=1e-12)


def test_joint_best_response_symmetric_fixed_point():
    g = ChargingGame.from_aggregates([1.0, 1.0])
    np.testing.assert_allclose(joint_best_response([1 / 3, 1 / 3], g), [1 / 3, 1 / 3], rtol=1e-15)


@given(st.lists(st.floats(1e-2, 10), min_size=2, max_size=8), st.floats(1.0, 50.0))
def test_joint_best_response_decreases_above_half_K(K, factor):
    g = ChargingGame.from_aggregates(K)
    x = g.aggregate_K / 2 * factor
    assert np.all(joint_best_response(x, g) < x)


def test_joint_best_response_is_jacobi():
    g = ChargingGame.from_aggregates([0.3, 1.0, 2.0])
    x = np.array([0.2, 0.4, 0.9])
    expected = [best_response(i, x, g) for i in range(3)]
    np.testing.assert_array_equal(joint_best_response(x, g), expected)


# --- concavity ------------------------------------------------------------------


@pytest.mark.parametrize("K,bids", [((1, 1), (0.5, 0.5)), ((1, 2), (0.2, 0.9))])
def test_curvature_negative(K, bids):
    g = ChargingGame.from_aggregates(K)
    assert utility_curvature_check(0, bids, g, 1e-4) < 0
    assert utility_curvature_check(1, bids, g, 1e-4) < 0


def test_curvature_matches_analytic_second_derivative():
    g = ChargingGame.from_aggregates([1.0, 1.0])
    # -2 * 20 * (1*1 + 1) / 2^3
    assert utility_second_derivative(0, [1, 1], g) == -10.0
    assert utility_curvature_check(0, [1, 1], g, 1e-4) == pytest.approx(-10.0, abs=1e-3)


def test_curvature_step_too_large():
    with pytest.raises(ValueError):
        utility_curvature_check(0, [0.5, 0.5], two_user(), 0.5)
