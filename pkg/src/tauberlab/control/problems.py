"""Controlled systems y' = f(y, u) with a cost g(y) in [0, 1], and the built-in instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError

__all__ = [
    "ControlProblem",
    "ControlSchedule",
    "counterexample",
    "smooth_variant",
    "get_problem",
    "PROBLEMS",
]


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control: ``values[j]`` on [breakpoints[j-1], breakpoints[j]).

    The first piece starts at 0 and the last one is held forever.
    """

    breakpoints: tuple = ()
    values: tuple = (0.0,)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bp) + 1:
            raise DomainError("need exactly one more value than breakpoints")
        if bp and bp[0] <= 0:
            raise DomainError("breakpoints must be positive")
        if any(b <= a for a, b in zip(bp, bp[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, u: float) -> "ControlSchedule":
        return cls((), (u,))

    @classmethod
    def bang(cls, tau: float, high: float = 1.0, low: float = 0.0) -> "ControlSchedule":
        """``high`` until tau, then ``low``."""
        if tau <= 0:
            return cls.constant(low)
        return cls((tau,), (high, low))

    def value_at(self, s):
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(s, dtype=float), side="right")
        return np.asarray(self.values)[idx]

    def merged(self) -> "ControlSchedule":
        """Same control with adjacent equal pieces fused."""
        bp, vals = [], [self.values[0]]
        for b, v in zip(self.breakpoints, self.values[1:]):
            if v != vals[-1]:
                bp.append(b)
                vals.append(v)
        return ControlSchedule(tuple(bp), tuple(vals))

    def shifted(self, s: float) -> "ControlSchedule":
        """The control s time units later, restarted at 0."""
        j = int(np.searchsorted(np.asarray(self.breakpoints), s, side="right"))
        bp = tuple(b - s for b in self.breakpoints[j:])
        return ControlSchedule(bp, self.values[j:])


@dataclass(frozen=True)
class ControlProblem:
    """Dynamics, cost and control set of a deterministic control problem.

    ``dynamics(states, u)`` and ``cost(states)`` are vectorised over a
    leading batch axis: states has shape (B, d), u shape (B,).

    Optional structure exploited by the solvers:

    flow
        closed-form solution ``flow(states, u, dt)`` for constant control;
        used instead of Runge-Kutta when present.
    zero_band
        ``(lo, hi)`` when the cost is 0 for lo <= y[0] <= hi and 1
        elsewhere, and y[0] is nondecreasing along every play. Payoffs
        are then computed exactly from band entry/exit times.
    absorbing
        predicate for states whose cost is 1 forever under every control.
    """

    name: str
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    cost: Callable[[np.ndarray], np.ndarray]
    control_grid: tuple
    state_dim: int
    control_bounds: tuple = (0.0, 1.0)
    invariant: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    flow: Optional[Callable] = field(default=None, compare=False)
    zero_band: Optional[tuple] = None
    absorbing: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.control_grid:
            raise DomainError("control grid must be nonempty")
        lo, hi = self.control_bounds
        if any(u < lo or u > hi for u in self.control_grid):
            raise DomainError("control grid leaves the control set")

    def check_schedule(self, sched: ControlSchedule) -> None:
        lo, hi = self.control_bounds
        if any(v < lo or v > hi for v in sched.values):
            raise DomainError(f"control values must lie in [{lo}, {hi}]")


# the counterexample: double integrator, cost 0 on the band 1 <= x <= 2


def _di_dynamics(states, u):
    states = np.asarray(states, dtype=float)
    out = np.empty_like(states)
    out[..., 0] = states[..., 1]
    out[..., 1] = u
    return out


def _di_flow(states, u, dt):
    states = np.asarray(states, dtype=float)
    out = np.empty_like(states)
    x, y = states[..., 0], states[..., 1]
    out[..., 0] = x + y * dt + 0.5 * u * dt * dt
    out[..., 1] = y + u * dt
    return out


def _band_cost(states):
    x = np.asarray(states, dtype=float)[..., 0]
    return np.where((x >= 1.0) & (x <= 2.0), 0.0, 1.0)


def _quadrant(states, tol=1e-9):
    states = np.asarray(states, dtype=float)
    return (states[..., 0] >= -tol) & (states[..., 1] >= -tol)


def counterexample() -> ControlProblem:
    """x' = y, y' = u with u in [0, 1] on the quadrant, cost 0 iff x in [1, 2]."""
    return ControlProblem(
        name="counterexample",
        dynamics=_di_dynamics,
        cost=_band_cost,
        control_grid=(0.0, 1.0),
        state_dim=2,
        invariant=_quadrant,
        flow=_di_flow,
        zero_band=(1.0, 2.0),
        absorbing=lambda s: np.asarray(s, dtype=float)[..., 0] > 2.0,
    )


# compact variant with continuous cost


def _smooth_factor(x):
    return np.clip(4.0 - x, 0.0, 1.0)


def _smooth_dynamics(states, u):
    states = np.asarray(states, dtype=float)
    c = _smooth_factor(states[..., 0])
    out = np.empty_like(states)
    out[..., 0] = c * states[..., 1]
    out[..., 1] = c * u
    return out


def _smooth_cost(states):
    x = np.asarray(states, dtype=float)[..., 0]
    return np.interp(x, [0.9, 1.0, 2.0, 2.1], [1.0, 0.0, 0.0, 1.0])


def _smooth_domain(states, tol=1e-9):
    states = np.asarray(states, dtype=float)
    x, y = states[..., 0], states[..., 1]
    return (
        (x >= -tol)
        & (y >= -tol)
        & (y <= np.sqrt(2.0 * np.maximum(x, 0.0)) + tol)
        & (x <= 4.0 + tol)
    )


def smooth_variant() -> ControlProblem:
    """Compact state space 0 <= y <= sqrt(2x) <= 2 sqrt(2), continuous cost.

    Same dynamics as the counterexample for x <= 3, scaled by (4 - x) on
    [3, 4]. The cost is 0 on [1, 2], 1 outside [0.9, 2.1], linear between.
    """
    return ControlProblem(
        name="smooth",
        dynamics=_smooth_dynamics,
        cost=_smooth_cost,
        control_grid=(0.0, 1.0),
        state_dim=2,
        invariant=_smooth_domain,
        absorbing=lambda s: np.asarray(s, dtype=float)[..., 0] > 2.1,
    )


PROBLEMS = {"counterexample": counterexample, "smooth": smooth_variant}


def get_problem(name: str) -> ControlProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise DomainError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
