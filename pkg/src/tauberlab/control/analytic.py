"""Limit formulas, lower-bound audit and probes for the double-integrator counterexample."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..plays import gamma_lambda, gamma_t
from ..report import ValueReport
from .estimate import SearchConfig, discount_horizon, estimate_Vlambda, estimate_Vt
from .problems import ControlProblem, ControlSchedule, counterexample
from .simulate import simulate

__all__ = [
    "analytic_V",
    "analytic_W",
    "one_switch_gamma_t",
    "one_switch_gamma_lambda",
    "random_schedule",
    "lower_bound_audit",
    "monotonicity_experiment",
    "nonuniformity_probe",
]


def _check_state(x0, y0):
    if x0 < 0 or y0 < 0:
        raise DomainError("state must lie in the nonnegative quadrant")


def analytic_V(x0: float, y0: float) -> float:
    """Limit of V_t(x0, y0) as t -> infinity."""
    _check_state(x0, y0)
    if y0 > 0 or x0 > 2:
        return 1.0
    if x0 >= 1:
        return 0.0
    return (1.0 - x0) / (2.0 - x0)


def analytic_W(x0: float, y0: float) -> float:
    """Limit of V_lambda(x0, y0) as lambda -> 0."""
    _check_state(x0, y0)
    if y0 > 0 or x0 > 2:
        return 1.0
    if x0 >= 1:
        return 0.0
    a, b = 1.0 - x0, 2.0 - x0
    return 1.0 - a**a / b**b


def _one_switch_times(tau: float) -> tuple[float, float]:
    # from rest at the origin: u = 1 on [0, tau], then coast at speed tau
    if tau * tau / 2 >= 1:
        t1 = math.sqrt(2.0)
    else:
        t1 = 1.0 / tau + tau / 2.0
    if tau * tau / 2 >= 2:
        t2 = 2.0
    else:
        t2 = 2.0 / tau + tau / 2.0
    return t1, t2


def one_switch_gamma_t(tau: float, t: float) -> float:
    """gamma_t from (0, 0) under u = 1 until tau, then 0: 1 + min(1, t1/t) - min(1, t2/t)."""
    t1, t2 = _one_switch_times(tau)
    return 1.0 + min(1.0, t1 / t) - min(1.0, t2 / t)


def one_switch_gamma_lambda(tau: float, lam: float) -> float:
    """gamma_lambda from (0, 0) under the same control: 1 - exp(-lam t1) + exp(-lam t2)."""
    t1, t2 = _one_switch_times(tau)
    return 1.0 - math.exp(-lam * t1) + math.exp(-lam * t2)


def random_schedule(rng: np.random.Generator, horizon: float, max_pieces: int = 6) -> ControlSchedule:
    """Random piecewise-constant control in [0, 1].

    Switch times are log-uniform on [1e-3, horizon] so that short
    accelerations, the near-optimal ones here, are well represented.
    """
    k = int(rng.integers(1, max_pieces + 1))
    bp = np.unique(np.exp(rng.uniform(math.log(1e-3), math.log(horizon), size=k - 1)))
    if rng.random() < 0.5:
        vals = rng.integers(0, 2, size=bp.size + 1).astype(float)
    else:
        vals = rng.uniform(0.0, 1.0, size=bp.size + 1)
    return ControlSchedule(tuple(bp), tuple(vals))


def lower_bound_audit(
    n_random: int,
    t: float,
    lam: float,
    seed: int,
    h: float = 1e-2,
    slack: float | None = None,
    tail_tol: float = 1e-6,
) -> ValueReport:
    """Check gamma_t >= 1/2 and gamma_lambda >= 3/4 on sampled plays from (0, 0).

    Payoffs come from simulated trajectories (trapezoid quadrature), so
    each check carries ``slack`` (default 10 h). Two reference controls
    (u = 0 and the near-optimal one-switch control) precede the random ones.
    """
    if n_random < 1:
        raise DomainError("n_random must be at least 1")
    slack = 10.0 * h if slack is None else slack
    p = counterexample()
    rng = np.random.default_rng(seed)
    horizon = max(t, discount_horizon(lam, tail_tol))
    plays = [
        ("u=0", ControlSchedule.constant(0.0)),
        ("one_switch_t", ControlSchedule.bang(2.0 / t)),
        ("one_switch_lambda", ControlSchedule.bang(lam / math.log(2.0))),
    ]
    plays += [(f"random_{i}", random_schedule(rng, horizon)) for i in range(n_random)]

    rep = ValueReport(
        "lower_bound_audit",
        ["label", "gamma_t", "gamma_lambda", "bound_t", "bound_lambda", "pass"],
        meta={"t": t, "lambda": lam, "seed": seed, "h": h, "slack": slack, "n_random": n_random},
    )
    min_t, min_l = math.inf, math.inf
    for label, sched in plays:
        X = simulate(p, (0.0, 0.0), sched, horizon, h)
        gt = gamma_t(X, t)
        gl = gamma_lambda(X, lam, tail_tol)
        ok = gt >= 0.5 - slack and gl >= 0.75 - slack
        rep.add(label, gt, gl, 0.5, 0.75, ok)
        min_t, min_l = min(min_t, gt), min(min_l, gl)
    rep.meta["min_gamma_t"] = min_t
    rep.meta["min_gamma_lambda"] = min_l
    return rep


def monotonicity_experiment(
    p: ControlProblem,
    x0,
    t: float,
    split_fracs=(0.25, 0.5, 0.75),
    cfg: SearchConfig = SearchConfig(),
    slack: float = 0.0,
    eps: float = 0.02,
) -> ValueReport:
    """Value at X(s) along the witness play vs value at X(0), same horizon t.

    The value is nondecreasing along plays in the long run; at finite t
    we accept a drop of at most ``slack + eps``.
    """
    base = estimate_Vt(p, x0, t, cfg)
    X = simulate(p, x0, base.witness, t, cfg.h)
    rep = ValueReport(
        "monotonicity",
        ["s", "state", "value_start", "value_at_s", "pass"],
        meta={"problem": p.name, "t": t},
    )
    for frac in split_fracs:
        k = int(round(frac * t / cfg.h))
        y = X.states[k]
        est = estimate_Vt(p, y, t, cfg)
        ok = est.value >= base.value - slack - eps
        rep.add(k * cfg.h, tuple(float(v) for v in y), base.value, est.value, ok)
    return rep


def nonuniformity_probe(
    t: float = 1e3,
    lam: float = 1e-3,
    speeds=(0.1, 0.01),
    cfg: SearchConfig = SearchConfig(),
) -> ValueReport:
    """Values at (1, eps) against (1, 0): the limits jump from 0 to 1 as eps -> 0+."""
    p = counterexample()
    rep = ValueReport("nonuniformity", ["state_y", "V_t", "V_lambda"], meta={"t": t, "lambda": lam})
    for eps in (0.0, *speeds):
        vt = estimate_Vt(p, (1.0, eps), t, cfg).value
        vl = estimate_Vlambda(p, (1.0, eps), lam, cfg).value
        rep.add(eps, vt, vl)
    return rep
