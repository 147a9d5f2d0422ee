"""Forward simulation of piecewise-constant controls."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, FeasibilityError
from ..plays import Trajectory
from .problems import ControlProblem, ControlSchedule

__all__ = ["simulate", "simulate_batch", "schedule_arrays", "rk4_step", "grid_size"]


def grid_size(horizon: float, h: float) -> int:
    """Number of steps N so that N*h covers ``horizon``."""
    return max(1, int(math.ceil(horizon / h - 1e-9)))


def rk4_step(f, x, u, dt):
    k1 = f(x, u)
    k2 = f(x + 0.5 * dt * k1, u)
    k3 = f(x + 0.5 * dt * k2, u)
    k4 = f(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_invariant(p: ControlProblem, states: np.ndarray, h: float) -> None:
    if p.invariant is None:
        return
    ok = np.asarray(p.invariant(states), dtype=bool)
    if not ok.all():
        k = int(np.argmin(ok))
        t = k * h
        raise FeasibilityError(
            f"{p.name}: state {states[k].tolist()} leaves the state space at t={t:g}", t
        )


def _simulate_flow(p, x0, sched, n, h):
    bp = np.asarray(sched.breakpoints, dtype=float)
    vals = np.asarray(sched.values, dtype=float)
    starts = np.concatenate([[0.0], bp])
    start_states = np.empty((starts.size, p.state_dim))
    start_states[0] = x0
    for j in range(1, starts.size):
        dt = starts[j] - starts[j - 1]
        start_states[j] = p.flow(start_states[j - 1][None, :], vals[j - 1], dt)[0]
    s = np.arange(n + 1) * h
    idx = np.searchsorted(bp, s, side="right")
    return p.flow(start_states[idx], vals[idx], s - starts[idx])


def _simulate_rk4(p, x0, sched, n, h):
    bp = list(sched.breakpoints)
    vals = sched.values
    states = np.empty((n + 1, p.state_dim))
    x = np.asarray(x0, dtype=float)[None, :].copy()
    states[0] = x[0]
    j = 0  # index of the active piece
    f = p.dynamics
    for k in range(n):
        t, t_end = k * h, (k + 1) * h
        while j < len(bp) and bp[j] <= t + 1e-12:
            j += 1
        # restart the integrator at every switch inside this step
        while j < len(bp) and bp[j] < t_end - 1e-12:
            x = rk4_step(f, x, np.array([vals[j]]), bp[j] - t)
            t = bp[j]
            j += 1
        x = rk4_step(f, x, np.array([vals[j]]), t_end - t)
        states[k + 1] = x[0]
    return states


def simulate(
    p: ControlProblem,
    x0,
    sched: ControlSchedule,
    horizon: float,
    h: float = 1e-2,
    check: bool = True,
) -> Trajectory:
    """Integrate y' = f(y, u) under ``sched`` and sample states and costs every h.

    Uses the problem's closed-form flow when it has one, otherwise
    classical fourth-order Runge-Kutta restarted at every switch time.
    """
    if horizon <= 0 or h <= 0:
        raise DomainError("horizon and step must be positive")
    p.check_schedule(sched)
    x0 = np.asarray(x0, dtype=float).reshape(p.state_dim)
    n = grid_size(horizon, h)
    if p.flow is not None:
        states = _simulate_flow(p, x0, sched, n, h)
    else:
        states = _simulate_rk4(p, x0, sched, n, h)
    if check:
        _check_invariant(p, states, h)
    costs = np.clip(np.asarray(p.cost(states), dtype=float), 0.0, 1.0)
    return Trajectory(states, costs, h)


def schedule_arrays(schedules) -> tuple[np.ndarray, np.ndarray]:
    """Pad schedules into ``simulate_batch`` arrays: +inf breaks, repeated last value."""
    m = max(len(s.breakpoints) for s in schedules)
    breaks = np.full((len(schedules), m), np.inf)
    values = np.empty((len(schedules), m + 1))
    for i, s in enumerate(schedules):
        k = len(s.breakpoints)
        breaks[i, :k] = s.breakpoints
        values[i, : k + 1] = s.values
        values[i, k + 1 :] = s.values[-1]
    return breaks, values


def simulate_batch(
    p: ControlProblem,
    x0,
    breaks: np.ndarray,
    values: np.ndarray,
    horizon: float,
    h: float = 1e-2,
    keep_states: bool = False,
):
    """Simulate B schedules at once; switch times are rounded to the grid.

    ``breaks`` has shape (B, m) (use +inf for unused slots) and ``values``
    shape (B, m + 1). ``x0`` is one state or a (B, d) array. Returns
    ``(states, costs)`` with costs of shape (B, N + 1); states is None
    unless ``keep_states``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    B = values.shape[0]
    breaks = np.asarray(breaks, dtype=float).reshape(B, -1)
    x = np.broadcast_to(np.asarray(x0, dtype=float), (B, p.state_dim)).copy()
    n = grid_size(horizon, h)
    # switch step index: piece j covers steps k with kb[j-1] <= k < kb[j]
    with np.errstate(invalid="ignore", over="ignore"):
        kb = np.where(np.isfinite(breaks), np.round(breaks / h), np.inf)
    costs = np.empty((B, n + 1))
    costs[:, 0] = p.cost(x)
    states = None
    if keep_states:
        states = np.empty((B, n + 1, p.state_dim))
        states[:, 0] = x
    piece = np.zeros(B, dtype=np.int64)
    rows = np.arange(B)
    m = breaks.shape[1]
    for k in range(n):
        if m:
            piece = (kb <= k).sum(axis=1)
        u = values[rows, piece]
        if p.flow is not None:
            x = p.flow(x, u, h)
        else:
            x = rk4_step(p.dynamics, x, u, h)
        costs[:, k + 1] = p.cost(x)
        if keep_states:
            states[:, k + 1] = x
    return states, np.clip(costs, 0.0, 1.0)
