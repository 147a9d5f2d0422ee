"""Exact payoffs for band problems: x' = y, y' = u >= 0, cost 0 iff x in [lo, hi].

Position is nondecreasing, so the zero-cost set of a play is the single
time interval [t_in, t_out] between reaching lo and leaving hi; both
payoffs then have closed forms in those two times.
"""

from __future__ import annotations

import numpy as np

__all__ = ["band_times", "band_gamma_t", "band_gamma_lambda", "band_unit_step", "one_switch_times"]


def _piece_table(x0, breaks, values):
    """Start times, durations and start states of every piece, batched."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    B, K = values.shape
    breaks = np.asarray(breaks, dtype=float).reshape(B, K - 1)
    starts = np.concatenate([np.zeros((B, 1)), breaks], axis=1)
    ends = np.concatenate([breaks, np.full((B, 1), np.inf)], axis=1)
    dur = ends - starts
    xs = np.empty((B, K))
    ys = np.empty((B, K))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (B, 2))
    xs[:, 0], ys[:, 0] = x0[:, 0], x0[:, 1]
    for j in range(1, K):
        d, u = dur[:, j - 1], values[:, j - 1]
        xs[:, j] = xs[:, j - 1] + ys[:, j - 1] * d + 0.5 * u * d * d
        ys[:, j] = ys[:, j - 1] + u * d
    return starts, dur, xs, ys, values


def _first_reach(starts, dur, xs, ys, us, level):
    """First time x(s) >= level, +inf if never."""
    B, K = xs.shape
    hit = np.full(B, np.inf)
    done = xs[:, 0] >= level
    hit[done] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(K):
            need = level - xs[:, j]
            y, u = ys[:, j], us[:, j]
            # positive root of u/2 tau^2 + y tau = need, in cancellation-free form
            tau = 2.0 * need / (y + np.sqrt(y * y + 2.0 * u * need))
            tau = np.where(need <= 0, 0.0, tau)
            tau = np.where(np.isnan(tau), np.inf, tau)
            now = ~done & (tau <= dur[:, j])
            hit[now] = starts[now, j] + tau[now]
            done |= now
    return hit


def band_times(x0, breaks, values, band=(1.0, 2.0)):
    """Entry and exit times (t_in, t_out) of the zero-cost band, batched over schedules.

    ``values`` (B, K) are the piece controls and ``breaks`` (B, K-1) the
    switch times; the last piece is held forever. Exit means first time
    with x > hi, so a play resting at x = hi stays in the band.
    """
    lo, hi = band
    starts, dur, xs, ys, us = _piece_table(x0, breaks, values)
    t_in = _first_reach(starts, dur, xs, ys, us, lo)
    t_out = _first_reach(starts, dur, xs, ys, us, np.nextafter(hi, np.inf))
    t_in = np.minimum(t_in, t_out)
    return t_in, t_out


def band_gamma_t(t_in, t_out, t):
    occupied = np.clip(t_out, 0.0, t) - np.clip(t_in, 0.0, t)
    return 1.0 - occupied / t


def band_gamma_lambda(t_in, t_out, lam):
    return 1.0 - (np.exp(-lam * t_in) - np.exp(-lam * t_out))


def band_unit_step(states, sched_breaks, sched_values, band=(1.0, 2.0)):
    """End states and integrated cost over [0, 1] for many start states, one unit schedule."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    B = states.shape[0]
    vals = np.broadcast_to(np.asarray(sched_values, dtype=float), (B, len(sched_values)))
    brk = np.broadcast_to(np.asarray(sched_breaks, dtype=float), (B, len(sched_breaks)))
    t_in, t_out = band_times(states, brk, vals, band)
    unit_cost = band_gamma_t(t_in, t_out, 1.0)
    # end state after one time unit
    x, y = states[:, 0].copy(), states[:, 1].copy()
    edges = [0.0, *[min(b, 1.0) for b in sched_breaks], 1.0]
    for j, u in enumerate(sched_values):
        d = edges[j + 1] - edges[j]
        if d <= 0:
            continue
        x = x + y * d + 0.5 * u * d * d
        y = y + u * d
    return np.stack([x, y], axis=1), unit_cost


def one_switch_times(tau: float, x0: float = 0.0):
    """Band entry/exit from (x0, 0) under u = 1 until tau, then 0 (closed form)."""
    t_in, t_out = band_times(np.array([x0, 0.0]), np.array([[tau]]), np.array([[1.0, 0.0]]))
    return float(t_in[0]), float(t_out[0])
