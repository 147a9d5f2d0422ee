"""Upper estimates of V_t and V_lambda by search over piecewise-constant controls.

The searched family is: K equal pieces with values from the control grid,
then coordinate descent on the switch times. Every returned value is the
payoff of an actual play, hence an upper bound on the true infimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError
from ..means import exponential_weights
from ..plays import gamma_lambda, gamma_t
from .band import band_gamma_lambda, band_gamma_t, band_times
from .problems import ControlProblem, ControlSchedule
from .simulate import simulate, simulate_batch

__all__ = [
    "SearchConfig",
    "Estimate",
    "estimate_Vt",
    "estimate_Vlambda",
    "payoff_t",
    "payoff_lambda",
    "discount_horizon",
]


@dataclass(frozen=True)
class SearchConfig:
    pieces: int = 8
    control_grid: Optional[tuple] = None  # defaults to the problem's grid
    sweeps: int = 2
    scan_points: int = 24
    zoom_levels: int = 40
    h: float = 1e-2
    tail_tol: float = 1e-6
    max_evals: Optional[int] = None
    exact: bool = True  # use closed-form band payoffs when the problem allows


@dataclass(frozen=True)
class Estimate:
    value: float
    witness: ControlSchedule
    horizon: float
    evaluations: int
    budget_exhausted: bool = False

    def __iter__(self):
        # allows ``value, witness = estimate_Vt(...)``
        return iter((self.value, self.witness))


def discount_horizon(lam: float, tail_tol: float) -> float:
    """Horizon S with exp(-lam S) = tail_tol (costs are bounded by 1)."""
    return math.log(1.0 / tail_tol) / lam


class _Budget(Exception):
    pass


@dataclass
class _Objective:
    """Batched payoff of schedules (breaks (B, m), values (B, m+1))."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grid_step: Optional[float]  # switch times are snapped to this grid when set
    limit: Optional[int]
    count: int = 0

    def __call__(self, breaks, values):
        breaks = np.atleast_2d(breaks)
        values = np.atleast_2d(values)
        if self.limit is not None and self.count + len(breaks) > self.limit:
            raise _Budget
        self.count += len(breaks)
        return self.fn(breaks, values)


def _use_band(p: ControlProblem, x0, cfg: SearchConfig) -> bool:
    return cfg.exact and p.zero_band is not None and p.state_dim == 2


def _objective(p: ControlProblem, x0, kind: str, param: float, horizon: float, cfg: SearchConfig):
    x0 = np.asarray(x0, dtype=float)
    if _use_band(p, x0, cfg):
        band = p.zero_band

        def fn(breaks, values):
            values = np.broadcast_to(values, (breaks.shape[0], values.shape[1]))
            t_in, t_out = band_times(x0, breaks, values, band)
            if kind == "t":
                return band_gamma_t(t_in, t_out, param)
            return band_gamma_lambda(t_in, t_out, param)

        return _Objective(fn, None, cfg.max_evals)

    h = cfg.h

    def fn(breaks, values):
        values = np.broadcast_to(values, (breaks.shape[0], values.shape[1]))
        _, costs = simulate_batch(p, x0, breaks, values, horizon, h)
        s = np.arange(costs.shape[1]) * h
        if kind == "t":
            n = int(round(param / h))
            c = costs[:, : n + 1]
            return h * (c.sum(axis=1) - 0.5 * (c[:, 0] + c[:, -1])) / param
        quad = costs @ exponential_weights(costs.shape[1] - 1, h, param)
        return quad + math.exp(-param * s[-1]) * costs[:, -1]

    return _Objective(fn, h, cfg.max_evals)


def _fractions(n: int) -> np.ndarray:
    g = np.geomspace(1e-10, 0.5, n)
    r = np.concatenate([g, 1.0 - g, np.linspace(0.0, 1.0, n + 2)[1:-1]])
    return np.unique(r[(r > 0) & (r < 1)])


def _line_search(obj: _Objective, breaks, values, j, lo, hi, cfg: SearchConfig):
    """Minimise over breaks[j] in (lo, hi) by a log/linear scan followed by zooming."""

    def evaluate(pos):
        if obj.grid_step is not None:
            pos = np.unique(np.round(pos / obj.grid_step) * obj.grid_step)
            pos = pos[(pos > lo) & (pos < hi)]
            if pos.size == 0:
                return pos, np.empty(0)
        trial = np.repeat(breaks[None, :], pos.size, axis=0)
        trial[:, j] = pos
        return pos, obj(trial, values[None, :])

    pos, vals = evaluate(lo + (hi - lo) * _fractions(cfg.scan_points))
    if pos.size == 0:
        return breaks[j], math.inf
    i = int(np.argmin(vals))
    best_pos, best_val = float(pos[i]), float(vals[i])
    for _ in range(cfg.zoom_levels):
        a = pos[i - 1] if i > 0 else lo
        b = pos[i + 1] if i + 1 < pos.size else hi
        if b - a <= 1e-14 * max(1.0, abs(hi)):
            break
        if obj.grid_step is not None and b - a <= 2 * obj.grid_step:
            break
        pos, vals = evaluate(np.linspace(a, b, cfg.scan_points + 2)[1:-1])
        if pos.size == 0:
            break
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_pos, best_val = float(pos[i]), float(vals[i])
        else:
            # the zoomed scan did not improve; recentre on the incumbent
            pos = np.concatenate([pos, [best_pos]])
            vals = np.concatenate([vals, [best_val]])
            order = np.argsort(pos)
            pos, vals = pos[order], vals[order]
            i = int(np.searchsorted(pos, best_pos))
    return best_pos, best_val


def _refine(obj: _Objective, breaks, values, value, horizon, cfg: SearchConfig):
    breaks = breaks.copy()
    for _ in range(cfg.sweeps):
        improved = False
        for j in range(breaks.size):
            lo = breaks[j - 1] if j > 0 else 0.0
            hi = breaks[j + 1] if j + 1 < breaks.size else horizon
            pos, val = _line_search(obj, breaks, values, j, lo, hi, cfg)
            if val < value - 1e-15:
                breaks[j], value = pos, val
                improved = True
        if not improved:
            break
    return breaks, value


def _runs(pattern):
    """Collapse equal neighbours: values of the runs and indices of run starts."""
    vals, starts = [pattern[0]], [0]
    for i, v in enumerate(pattern[1:], start=1):
        if v != vals[-1]:
            vals.append(v)
            starts.append(i)
    return tuple(vals), starts


def _search(p: ControlProblem, x0, kind: str, param: float, horizon: float, cfg: SearchConfig) -> Estimate:
    if cfg.pieces < 1:
        raise DomainError("need at least one piece")
    grid = tuple(cfg.control_grid if cfg.control_grid is not None else p.control_grid)
    obj = _objective(p, x0, kind, param, horizon, cfg)
    K = cfg.pieces
    equal = horizon * np.arange(K + 1) / K
    if obj.grid_step is not None:
        equal = np.round(equal / obj.grid_step) * obj.grid_step

    # coarse pass over every value pattern on equal pieces, grouped by run structure
    patterns = list(itertools.product(grid, repeat=K))
    best_by_runs: dict = {}
    exhausted = False
    try:
        for m in range(1, K + 1):
            group = []
            for pat in patterns:
                runs, starts = _runs(pat)
                if len(runs) == m:
                    group.append((pat, runs, np.asarray(equal[starts[1:]], dtype=float)))
            if not group:
                continue
            br = np.array([g[2] for g in group]).reshape(len(group), m - 1)
            vl = np.array([g[1] for g in group], dtype=float).reshape(len(group), m)
            vals = obj(br, vl)
            for (pat, runs, b), v in zip(group, vals):
                cur = best_by_runs.get(runs)
                # first pattern in lexicographic order wins ties
                if cur is None or v < cur[0]:
                    best_by_runs[runs] = (float(v), b)
    except _Budget:
        exhausted = True

    candidates = []
    for runs, (v, b) in best_by_runs.items():
        candidates.append((v, runs, tuple(b)))
    if exhausted:
        return _finish(candidates, horizon, obj, True)

    refined = []
    try:
        for v, runs, b in sorted(candidates):
            b_arr = np.asarray(b, dtype=float)
            if b_arr.size:
                b_arr, v = _refine(obj, b_arr, np.asarray(runs, dtype=float), v, horizon, cfg)
            refined.append((float(v), runs, tuple(float(x) for x in b_arr)))
    except _Budget:
        exhausted = True
    return _finish(refined + candidates, horizon, obj, exhausted)


def _finish(candidates, horizon, obj, exhausted) -> Estimate:
    if not candidates:
        raise DomainError("search budget too small to evaluate a single schedule")
    # values equal to ~13 digits tie; fewer switches, then lexicographic order, win
    v, runs, b = min(candidates, key=lambda c: (float(f"{c[0]:.13g}"), len(c[1]), c[1], c[2]))
    witness = ControlSchedule(b, runs).merged()
    return Estimate(float(v), witness, horizon, obj.count, exhausted)


def estimate_Vt(p: ControlProblem, x0, t: float, search: SearchConfig = SearchConfig()) -> Estimate:
    """Best horizon-t average cost over the searched control family (an upper bound on V_t)."""
    if t <= 0:
        raise DomainError("t must be positive")
    return _search(p, x0, "t", float(t), float(t), search)


def estimate_Vlambda(p: ControlProblem, x0, lam: float, search: SearchConfig = SearchConfig()) -> Estimate:
    """Best lam-discounted cost over the searched family (an upper bound on V_lambda).

    Switch times are searched on [0, S] with S = ln(1/tail_tol)/lam.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    S = discount_horizon(lam, search.tail_tol)
    return _search(p, x0, "lambda", float(lam), S, search)


def payoff_t(p: ControlProblem, x0, sched: ControlSchedule, t: float, h: float = 1e-2, exact: bool = True) -> float:
    """gamma_t of the play generated by ``sched``."""
    if exact and p.zero_band is not None:
        t_in, t_out = band_times(np.asarray(x0, dtype=float), np.array([sched.breakpoints]), np.array([sched.values]), p.zero_band)
        return float(band_gamma_t(t_in, t_out, t)[0])
    return gamma_t(simulate(p, x0, sched, t, h), t)


def payoff_lambda(p: ControlProblem, x0, sched: ControlSchedule, lam: float, h: float = 1e-2, tail_tol: float = 1e-6, exact: bool = True) -> float:
    """gamma_lambda of the play generated by ``sched``."""
    if exact and p.zero_band is not None:
        t_in, t_out = band_times(np.asarray(x0, dtype=float), np.array([sched.breakpoints]), np.array([sched.values]), p.zero_band)
        return float(band_gamma_lambda(t_in, t_out, lam)[0])
    S = discount_horizon(lam, tail_tol)
    return gamma_lambda(simulate(p, x0, sched, S, h), lam, tail_tol)
