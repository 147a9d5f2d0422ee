import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tauberlab.errors import AlignmentError, ConcatenationError, ContractError, DomainError, InsufficientDataError
from tauberlab.kernel import convexity_sides
from tauberlab.means import exponential_weights, square_wave
from tauberlab.plays import (
    Trajectory,
    concatenate,
    gamma_lambda,
    gamma_t,
    good_window_time,
    payoff_curve,
    trajectory_csv,
    window_average,
)


def _indicator(T, step, horizon):
    return Trajectory.from_cost_function(lambda s: (s <= T + 1e-12).astype(float), step, horizon)


def _steps(rng, n, step, pieces=12):
    """Piecewise-constant costs whose switch times sit on the grid."""
    cuts = np.sort(rng.choice(np.arange(1, n), size=pieces - 1, replace=False))
    vals = rng.uniform(0, 1, pieces)
    return vals[np.searchsorted(cuts, np.arange(n + 1), side="right")]


# construction


def test_trajectory_validation():
    with pytest.raises(DomainError):
        Trajectory.from_costs([0.2, 1.5], 0.1)
    with pytest.raises(DomainError):
        Trajectory.from_costs([0.2], 0.1)
    with pytest.raises(DomainError):
        Trajectory.from_costs([0.2, 0.3], 0.0)
    with pytest.raises(DomainError):
        Trajectory(np.arange(3), np.zeros(2), 0.1)
    X = Trajectory.from_costs(np.zeros(11), 0.1)
    assert X.horizon == pytest.approx(1.0)
    with pytest.raises(ValueError):
        X.costs[0] = 1.0


# concatenation


def test_concatenate_at_zero_is_y():
    X = Trajectory.from_costs(np.full(5, 0.2), 0.5)
    Y = Trajectory(np.zeros(7, dtype=int), np.full(7, 0.9), 0.5)
    X = Trajectory(np.zeros(5, dtype=int), X.costs, 0.5)
    Z = concatenate(X, 0.0, Y)
    assert np.array_equal(Z.costs, Y.costs)
    assert np.array_equal(Z.states, Y.states)


def test_concatenate_constant_path_extends():
    X = Trajectory(np.zeros((11, 2)), np.full(11, 0.4), 0.1)
    Z = concatenate(X, 0.1, X)
    assert Z.n == 11
    assert np.all(Z.costs == 0.4)
    assert np.all(Z.states == 0.0)


def test_concatenate_splice_average():
    h = 0.01
    X = Trajectory(np.zeros((101, 1)), np.ones(101), h)
    Y = Trajectory(np.zeros((101, 1)), np.zeros(101), h)
    Z = concatenate(X, 1.0, Y)
    assert Z.horizon == pytest.approx(2.0)
    # the cost drops from 1 to 0 across one grid cell at s = 1
    assert gamma_t(Z, 2.0) == pytest.approx(0.5, abs=h)


def test_concatenate_errors():
    X = Trajectory(np.zeros((11, 1)), np.zeros(11), 0.1)
    Y = Trajectory(np.ones((11, 1)), np.zeros(11), 0.1)
    with pytest.raises(ConcatenationError):
        concatenate(X, 0.5, Y)
    with pytest.raises(AlignmentError):
        concatenate(X, 0.55, X)
    with pytest.raises(AlignmentError):
        concatenate(X, 0.5, Trajectory(np.zeros((11, 1)), np.zeros(11), 0.2))
    with pytest.raises(InsufficientDataError):
        concatenate(X, 2.0, X)
    with pytest.raises(DomainError):
        concatenate(X, -0.1, X)


# gamma_t and gamma_lambda


def test_gamma_t_examples():
    assert gamma_t(Trajectory.from_costs(np.full(41, 0.35), 0.1), 4.0) == pytest.approx(0.35, abs=1e-15)
    # the step at s = 1 is linearly interpolated over one cell
    X = _indicator(1.0, 1e-3, 4.0)
    assert gamma_t(X, 4.0) == pytest.approx(0.25, abs=1e-3)
    W = Trajectory.from_cost_function(square_wave(), 0.01, 6.0)
    assert gamma_t(W, 6.0) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(InsufficientDataError):
        gamma_t(W, 6.5)
    with pytest.raises(DomainError):
        gamma_t(W, 0.0)


def test_gamma_lambda_examples():
    X = Trajectory.from_costs(np.full(20001, 0.7), 0.01)
    assert gamma_lambda(X, 0.1, 1e-6) == pytest.approx(0.7, abs=1e-6)
    # exact even at a coarse step, since the exponential is integrated exactly
    C = Trajectory.from_costs(np.full(51, 0.7), 1.0)
    assert gamma_lambda(C, 1.0, 1e-6) == pytest.approx(0.7, abs=1e-14)
    ind = _indicator(7.0, 1e-3, 200.0)
    assert gamma_lambda(ind, 0.1) == pytest.approx(1 - math.exp(-0.7), abs=1e-4)
    W = Trajectory.from_cost_function(square_wave(), 1e-3, 200.0)
    assert gamma_lambda(W, 0.1) == pytest.approx(1 / (1 + math.exp(-0.1)), abs=1e-4)
    assert 1 / (1 + math.exp(-0.1)) == pytest.approx(0.524979, abs=1e-6)
    with pytest.raises(InsufficientDataError):
        gamma_lambda(W, 0.01)
    with pytest.raises(DomainError):
        gamma_lambda(W, 0.0)


@given(st.integers(0, 2**31 - 1), st.floats(0.02, 2.0))
def test_gamma_lambda_within_unit_interval(seed, lam):
    rng = np.random.default_rng(seed)
    h = 0.05
    n = int(math.ceil(15 / lam / h))
    X = Trajectory.from_costs(_steps(rng, n, h), h)
    assert 0.0 <= gamma_lambda(X, lam, 1e-6) <= 1.0 + 1e-6


# splitting identities


@given(st.integers(0, 2**31 - 1), st.integers(1, 300), st.integers(1, 300))
def test_splitting_identity(seed, ks, kt):
    rng = np.random.default_rng(seed)
    h = 0.01
    X = Trajectory(np.arange(ks + 1), rng.uniform(0, 1, ks + 1), h)
    Y = Trajectory(np.concatenate([[ks], rng.integers(0, 9, kt)]), rng.uniform(0, 1, kt + 1), h)
    s, t = ks * h, kt * h
    Z = concatenate(X, s, Y)
    lhs = gamma_t(Z, s + t)
    rhs = s / (s + t) * gamma_t(X, s) + t / (s + t) * gamma_t(Y, t)
    # the splice replaces X's last sample by Y's first one
    slack = h * abs(X.costs[-1] - Y.costs[0]) / (s + t)
    assert abs(lhs - rhs) <= slack + 1e-12


@given(st.integers(0, 2**31 - 1), st.integers(1, 400), st.floats(0.05, 1.0))
def test_discount_splitting(seed, ks, lam):
    rng = np.random.default_rng(seed)
    h = 0.02
    kt = int(math.ceil(16 / lam / h))
    X = Trajectory(np.arange(ks + 1), rng.uniform(0, 1, ks + 1), h)
    Y = Trajectory(np.concatenate([[ks], np.zeros(kt, dtype=int)]), _steps(rng, kt, h), h)
    s = ks * h
    Z = concatenate(X, s, Y)
    # prefix: the product rule on [0, s] alone
    pre = Trajectory.from_costs(np.concatenate([X.costs[:ks], [Y.costs[0]]]), h)
    head = float(np.dot(exponential_weights(ks, h, lam), pre.costs))
    rhs = head + math.exp(-lam * s) * gamma_lambda(Y, lam, 1e-6)
    assert gamma_lambda(Z, lam, 1e-6) == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_discounted_is_mixture_of_averages(seed):
    rng = np.random.default_rng(seed)
    h = 0.01
    X = Trajectory.from_costs(_steps(rng, 20000, h, pieces=40), h)
    d, m, _ = convexity_sides(X, 0.1, 200.0)
    assert abs(d - m) <= 1e-3
    assert gamma_lambda(X, 0.1, 1e-6) == pytest.approx(m, abs=1e-3)


# payoff curve


def test_payoff_curve_examples():
    c = payoff_curve(Trajectory.from_costs(np.full(51, 0.6), 0.1))
    assert np.allclose(c.values, 0.6, atol=1e-15)
    h = 1e-3
    X = _indicator(2.0, h, 10.0)
    c = payoff_curve(X)
    ref = np.minimum(c.grid, 2.0) / c.grid
    assert np.max(np.abs(c.values - ref)) <= h


@given(st.integers(0, 2**31 - 1))
def test_payoff_curve_bounded_and_lipschitz(seed):
    rng = np.random.default_rng(seed)
    h = 0.01
    X = Trajectory.from_costs(_steps(rng, 2000, h), h)
    c = payoff_curve(X)
    assert c.values.min() >= 0 and c.values.max() <= 1
    dv = np.abs(np.diff(c.values))
    assert np.all(dv <= h * 2 / c.grid[:-1] + 1e-12)
    # incremental curve agrees with the one-off average
    for k in rng.integers(1, 2001, 5):
        assert c.values[k - 1] == pytest.approx(gamma_t(X, k * h), abs=1e-12)


# good window


def test_good_window_examples():
    X = Trajectory.from_costs(np.full(101, 0.3), 0.1)
    assert good_window_time(X, 10.0, 0.1, 0.3) == 0.0
    assert window_average(X, 0.0, 5.0) == pytest.approx(0.3)
    Z = Trajectory.from_costs(np.zeros(101), 0.1)
    assert good_window_time(Z, 10.0, 0.05, 0.0) == 0.0

    h = 1e-3
    X = _indicator(2.0, h, 10.0)
    L = good_window_time(X, 10.0, 0.3, 0.2)
    assert L == pytest.approx(4.0, abs=2 * h)
    for T in (0.5, 1.0, 3.0, 10.0 - L):
        assert window_average(X, L, T) == pytest.approx(0.0, abs=1e-12)


def test_good_window_contract():
    X = Trajectory.from_costs(np.ones(101), 0.1)
    with pytest.raises(ContractError):
        good_window_time(X, 10.0, 0.2, 0.5)
    with pytest.raises(DomainError):
        good_window_time(X, 10.0, 0.0, 1.0)
    with pytest.raises(InsufficientDataError):
        good_window_time(X, 11.0, 0.2, 1.0)


@pytest.mark.parametrize("seed", range(100))
def test_good_window_guarantees(seed):
    rng = np.random.default_rng(1000 + seed)
    h = 0.01
    n = int(rng.integers(200, 2000))
    X = Trajectory.from_costs(_steps(rng, n, h, pieces=int(rng.integers(2, 20))), h)
    t = X.horizon
    eps = float(rng.uniform(0.02, 0.5))
    g = gamma_t(X, t)
    v_ref = min(g - eps / 2 * rng.uniform(0, 1), 1 - eps)
    v_ref = max(v_ref, g - eps / 2)
    L = good_window_time(X, t, eps, v_ref)
    assert L <= t * (1 - eps / 2) + h
    k_L = int(round(L / h))
    curve = payoff_curve(X)
    for k in range(k_L + 1, n + 1):
        T = (k - k_L) * h
        assert window_average(X, L, T) <= v_ref + eps + 1e-9
    assert np.all(curve.values[k_L:] <= v_ref + eps + 1e-12)


# csv


def test_csv_dump():
    X = Trajectory(np.array([[0.0, 1.0], [0.5, 1.5], [1.0, 2.0]]), np.array([0.0, 0.25, 1.0]), 0.5)
    rows = list(csv.reader(io.StringIO(trajectory_csv(X))))
    assert rows[0] == ["s", "state0", "state1", "cost"]
    assert len(rows) == 4
    assert [float(v) for v in rows[2]] == [0.5, 0.5, 1.5, 0.25]
    Y = Trajectory.from_costs([0.1, 0.2], 1.0)
    rows = list(csv.reader(io.StringIO(trajectory_csv(Y))))
    assert rows[0] == ["s", "state", "cost"]
    assert rows[2] == ["1.0", "1", "0.2"]
