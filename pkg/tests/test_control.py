import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tauberlab.control import (
    ControlProblem,
    ControlSchedule,
    SearchConfig,
    analytic_V,
    analytic_W,
    counterexample,
    estimate_Vlambda,
    estimate_Vt,
    get_problem,
    lower_bound_audit,
    monotonicity_experiment,
    nonuniformity_probe,
    one_switch_gamma_lambda,
    one_switch_gamma_t,
    payoff_lambda,
    payoff_t,
    random_schedule,
    schedule_arrays,
    simulate,
    simulate_batch,
    smooth_variant,
)
from tauberlab.control.band import band_gamma_lambda, band_gamma_t, band_times, one_switch_times
from tauberlab.errors import DomainError, FeasibilityError
from tauberlab.plays import gamma_lambda, gamma_t

P = counterexample()
# same system integrated with Runge-Kutta instead of the closed-form flow
P_RK4 = replace(P, flow=None, name="counterexample_rk4")

schedules = st.builds(
    lambda gaps, vals: ControlSchedule(tuple(np.cumsum(gaps)), tuple(vals[: len(gaps) + 1])),
    st.lists(st.floats(0.05, 3.0), max_size=4),
    st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5),
)


# schedules and problems


def test_schedule_validation():
    with pytest.raises(DomainError):
        ControlSchedule((1.0,), (0.0,))
    with pytest.raises(DomainError):
        ControlSchedule((2.0, 1.0), (0.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        ControlSchedule((0.0,), (1.0, 0.0))
    s = ControlSchedule((1.0, 2.0, 3.0), (1.0, 1.0, 0.0, 0.0)).merged()
    assert s == ControlSchedule((2.0,), (1.0, 0.0))
    assert ControlSchedule.bang(0.0) == ControlSchedule.constant(0.0)
    assert ControlSchedule((1.0, 2.0), (1.0, 0.5, 0.0)).shifted(1.5) == ControlSchedule((0.5,), (0.5, 0.0))
    assert list(ControlSchedule.bang(1.0).value_at([0.0, 0.99, 1.0, 5.0])) == [1.0, 1.0, 0.0, 0.0]


def test_problem_validation():
    with pytest.raises(DomainError):
        replace(P, control_grid=())
    with pytest.raises(DomainError):
        replace(P, control_grid=(0.0, 2.0))
    with pytest.raises(DomainError):
        simulate(P, (0, 0), ControlSchedule.constant(-1.0), 1.0)
    with pytest.raises(DomainError):
        get_problem("pendulum")
    assert get_problem("smooth").name == "smooth"


# simulation


def test_simulate_examples():
    X = simulate(P, (0, 0), ControlSchedule.constant(0.0), 5.0)
    assert np.all(X.states == 0.0)
    assert np.all(X.costs == 1.0)
    X = simulate(P, (0, 0), ControlSchedule.constant(1.0), 2.0, h=0.01)
    assert X.states[-1] == pytest.approx([2.0, 2.0], abs=1e-12)
    X = simulate(P, (0, 0), ControlSchedule.bang(1.0), 3.0, h=0.01)
    assert X.states[-1] == pytest.approx([2.5, 1.0], abs=1e-12)


@given(schedules, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_rk4_matches_flow(sched, x0, y0):
    a = simulate(P, (x0, y0), sched, 6.0, h=0.05)
    b = simulate(P_RK4, (x0, y0), sched, 6.0, h=0.05)
    # RK4 is exact on quadratics, and restarts at each switch
    assert np.max(np.abs(a.states - b.states)) <= 1e-10


def test_rk4_converges_on_nonpolynomial_dynamics():
    osc = ControlProblem("osc", lambda s, u: np.stack([s[..., 1], -s[..., 0] + 0 * u], axis=-1),
                         lambda s: np.zeros(s.shape[:-1]), (0.0,), 2, control_bounds=(0.0, 0.0))
    errs = []
    for h in (0.1, 0.05):
        X = simulate(osc, (1.0, 0.0), ControlSchedule.constant(0.0), 6.0, h=h)
        errs.append(abs(X.states[-1][0] - math.cos(X.horizon)))
    assert errs[1] < 1e-5
    assert math.log2(errs[0] / errs[1]) > 3.5


def test_feasibility_error_reports_time():
    boxed = replace(P, invariant=lambda s: np.asarray(s)[..., 0] <= 1.0)
    with pytest.raises(FeasibilityError) as info:
        simulate(boxed, (0, 0), ControlSchedule.constant(1.0), 3.0, h=0.01)
    # x = s^2/2 passes 1 at s = sqrt(2)
    assert info.value.time == pytest.approx(math.sqrt(2), abs=0.01)
    assert info.value.time > math.sqrt(2)


@given(schedules, st.floats(0.0, 3.0), st.floats(0.0, 1.0))
def test_speed_never_decreases(sched, x0, y0):
    X = simulate(P, (x0, y0), sched, 8.0, h=0.02)
    assert np.all(np.diff(X.states[:, 1]) >= -1e-12)
    assert np.all(np.diff(X.states[:, 0]) >= -1e-12)


def test_batch_matches_single(rng):
    scheds = []
    for _ in range(25):
        # batch switches are rounded to the grid, so put them there
        k = int(rng.integers(0, 5))
        bp = np.sort(rng.choice(np.arange(1, 1000), size=k, replace=False)) * 0.01
        scheds.append(ControlSchedule(tuple(bp), tuple(rng.uniform(0, 1, k + 1))))
    breaks, values = schedule_arrays(scheds)
    for prob in (P, P_RK4):
        states, costs = simulate_batch(prob, (0.2, 0.1), breaks, values, 10.0, 0.01, keep_states=True)
        for i, s in enumerate(scheds):
            X = simulate(prob, (0.2, 0.1), s, 10.0, 0.01)
            assert np.max(np.abs(states[i] - X.states)) <= 1e-9
            assert np.array_equal(costs[i], X.costs)


def test_schedule_arrays_padding():
    b, v = schedule_arrays([ControlSchedule.constant(0.5), ControlSchedule((1.0, 2.0), (1.0, 0.0, 1.0))])
    assert b.shape == (2, 2) and v.shape == (2, 3)
    assert np.all(np.isinf(b[0])) and list(v[0]) == [0.5, 0.5, 0.5]


# band payoffs


def test_band_times_one_switch():
    tau = 0.5
    t_in, t_out = one_switch_times(tau)
    assert t_in == pytest.approx(1 / tau + tau / 2, abs=1e-12)
    assert t_out == pytest.approx(2 / tau + tau / 2, abs=1e-12)
    assert band_times(np.array([1.5, 0.0]), np.empty((1, 0)), np.array([[0.0]]))[1][0] == math.inf


@pytest.mark.parametrize("seed", range(10))
def test_band_payoffs_match_simulation(seed):
    rng = np.random.default_rng(seed)
    h = 1e-3
    for _ in range(5):
        s = random_schedule(rng, 20.0)
        x0 = (float(rng.uniform(0, 1.5)), float(rng.uniform(0, 0.5)) * (rng.random() < 0.5))
        X = simulate(P, x0, s, 200.0, h)
        t_in, t_out = band_times(np.array(x0), np.array([s.breakpoints]), np.array([s.values]))
        for t in (5.0, 50.0):
            assert gamma_t(X, t) == pytest.approx(band_gamma_t(t_in, t_out, t)[0], abs=4 * h / t + 1e-12)
        assert gamma_lambda(X, 0.1) == pytest.approx(band_gamma_lambda(t_in, t_out, 0.1)[0], abs=4 * h * 0.1 + 1e-6)


# smooth variant


def test_smooth_cost_examples():
    p = smooth_variant()
    c = p.cost(np.array([[1.5, 0.0], [0.95, 0.0], [0.5, 0.0], [2.05, 0.0], [3.0, 0.0]]))
    assert list(c) == pytest.approx([0.0, 0.5, 1.0, 0.5, 1.0])
    assert p.invariant(np.array([[2.0, 2.0], [2.0, 2.1], [4.0, 0.0], [4.1, 0.0]])).tolist() == [True, False, True, False]


def test_smooth_forward_invariance():
    p = smooth_variant()
    rng = np.random.default_rng(11)
    n = 500
    x = rng.uniform(0, 4, n)
    y = rng.uniform(0, 1, n) * np.sqrt(2 * x)
    scheds = [random_schedule(rng, 20.0) for _ in range(n)]
    breaks, values = schedule_arrays(scheds)
    states, _ = simulate_batch(p, np.stack([x, y], axis=1), breaks, values, 20.0, 0.01, keep_states=True)
    assert p.invariant(states.reshape(-1, 2), tol=1e-7).all()


# estimators


FAST = SearchConfig(pieces=4, zoom_levels=30)


def test_estimate_at_rest_in_band():
    for t in (1.0, 100.0):
        assert estimate_Vt(P, (1.5, 0.0), t, FAST).value <= 1e-9
    for lam in (0.5, 0.01):
        assert estimate_Vlambda(P, (1.5, 0.0), lam, FAST).value <= 1e-9


def test_estimate_vt_origin():
    est = estimate_Vt(P, (0, 0), 100.0)
    assert one_switch_gamma_t(2 / 100, 100.0) == pytest.approx(0.5001, abs=1e-12)
    assert 0.5 <= est.value <= 0.5 + 0.05
    assert est.value <= 0.5001 + 1e-12
    # the witness reproduces the value
    assert payoff_t(P, (0, 0), est.witness, 100.0) == pytest.approx(est.value, abs=1e-12)
    sim = payoff_t(P, (0, 0), est.witness, 100.0, h=1e-3, exact=False)
    assert sim == pytest.approx(est.value, abs=1e-3)


def test_estimate_vt_decreases_to_half():
    vals = [estimate_Vt(P, (0, 0), t).value for t in (1e2, 1e3, 1e4)]
    assert vals[0] > vals[1] > vals[2] >= 0.5
    assert vals[2] <= 0.55


def test_estimate_vlambda_origin():
    lam = 0.1
    closed = one_switch_gamma_lambda(lam / math.log(2), lam)
    assert closed == pytest.approx(0.7518, abs=1e-4)
    est = estimate_Vlambda(P, (0, 0), lam)
    assert 0.75 <= est.value <= closed + 1e-12
    assert payoff_lambda(P, (0, 0), est.witness, lam) == pytest.approx(est.value, abs=1e-12)
    vals = [estimate_Vlambda(P, (0, 0), l).value for l in (1e-1, 1e-2, 1e-3)]
    assert vals[0] > vals[1] > vals[2] >= 0.75
    assert vals[2] <= 0.80


def test_estimates_are_upper_bounds(rng):
    # no sampled play beats the search, and the search never beats the proven bounds
    est = estimate_Vt(P, (0, 0), 50.0)
    assert est.value >= 0.5
    for _ in range(200):
        assert payoff_t(P, (0, 0), random_schedule(rng, 50.0), 50.0) >= est.value - 1e-12


def test_estimator_on_simulated_path():
    cfg = SearchConfig(pieces=3, sweeps=1, scan_points=8, zoom_levels=6, h=0.02, exact=False)
    est = estimate_Vt(P, (0, 0), 20.0, cfg)
    assert est.value >= 0.5 - 10 * cfg.h
    assert payoff_t(P, (0, 0), est.witness, 20.0, h=cfg.h, exact=False) == pytest.approx(est.value, abs=1e-9)


def test_estimator_budget():
    est = estimate_Vt(P, (0, 0), 100.0, SearchConfig(pieces=4, max_evals=20))
    assert est.budget_exhausted
    assert est.evaluations <= 20
    assert est.value >= 0.5
    with pytest.raises(DomainError):
        estimate_Vt(P, (0, 0), 100.0, SearchConfig(pieces=4, max_evals=0))
    with pytest.raises(DomainError):
        estimate_Vt(P, (0, 0), 0.0)
    with pytest.raises(DomainError):
        estimate_Vlambda(P, (0, 0), -1.0)


def test_estimator_deterministic():
    a = estimate_Vlambda(P, (0.3, 0.0), 0.05, FAST)
    b = estimate_Vlambda(P, (0.3, 0.0), 0.05, FAST)
    assert a == b


# analytic limits


@pytest.mark.parametrize(
    "x0, y0, v, w",
    [
        (0.0, 0.0, 0.5, 0.75),
        (0.5, 0.0, 1 / 3, 1 - 0.5**0.5 / 1.5**1.5),
        (1.5, 0.0, 0.0, 0.0),
        (3.0, 0.0, 1.0, 1.0),
        (1.0, 0.5, 1.0, 1.0),
    ],
)
def test_analytic_tables(x0, y0, v, w):
    assert analytic_V(x0, y0) == pytest.approx(v, abs=1e-15)
    assert analytic_W(x0, y0) == pytest.approx(w, abs=1e-15)


def test_analytic_values():
    assert analytic_W(0.5, 0.0) == pytest.approx(0.615099, abs=1e-6)
    with pytest.raises(DomainError):
        analytic_V(-1.0, 0.0)


@pytest.mark.parametrize("x0", [0.0, 0.25, 0.5, 0.8])
def test_estimates_approach_analytic(x0):
    vt = estimate_Vt(P, (x0, 0.0), 1e4).value
    vl = estimate_Vlambda(P, (x0, 0.0), 1e-3).value
    assert 0 <= vt - analytic_V(x0, 0.0) <= 0.07
    assert 0 <= vl - analytic_W(x0, 0.0) <= 0.07


# audits and probes


def test_lower_bound_audit():
    rep = lower_bound_audit(200, 100.0, 0.1, seed=7)
    assert rep.passed
    assert len(rep.rows) == 203
    assert rep.where(label="u=0")[0]["gamma_t"] == 1.0
    assert rep.meta["min_gamma_t"] == pytest.approx(0.5001, abs=0.01)
    assert rep.meta["min_gamma_lambda"] >= 0.75 - rep.meta["slack"]
    with pytest.raises(DomainError):
        lower_bound_audit(0, 100.0, 0.1, seed=7)


def test_monotonicity_experiment():
    rep = monotonicity_experiment(P, (0.0, 0.0), 100.0, cfg=FAST)
    assert rep.passed
    assert len(rep.rows) == 3


def test_nonuniformity():
    rep = nonuniformity_probe(1e3, 1e-3, cfg=FAST)
    rest = rep.where(state_y=0.0)[0]
    moving = rep.where(state_y=0.01)[0]
    assert rest["V_t"] <= 1e-9 and rest["V_lambda"] <= 1e-9
    # coasting through the band at speed eps is the best one can do
    assert moving["V_t"] == pytest.approx(1 - 1 / (0.01 * 1e3), abs=1e-9)
    assert moving["V_lambda"] >= 0.9
    assert rep.where(state_y=0.1)[0]["V_t"] == pytest.approx(0.99, abs=1e-9)


def test_tauberian_mismatch_at_origin():
    gap = estimate_Vlambda(P, (0, 0), 1e-3).value - estimate_Vt(P, (0, 0), 1e4).value
    assert gap == pytest.approx(0.25, abs=0.03)
