"""Sampled plays (trajectories), concatenation and the two payoff functionals."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConcatenationError, ContractError, DomainError, InsufficientDataError
from .means import exponential_weights

__all__ = [
    "Trajectory",
    "PayoffCurve",
    "concatenate",
    "gamma_t",
    "gamma_lambda",
    "payoff_curve",
    "good_window_time",
    "window_average",
    "trajectory_csv",
]

STATE_TOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """States X(k h) and costs g(X(k h)) for k = 0..N on a uniform grid.

    ``states`` is either an (N+1, d) float array or a 1-D array of opaque
    (e.g. integer) state labels.
    """

    states: np.ndarray
    costs: np.ndarray
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError("step must be positive")
        costs = np.asarray(self.costs, dtype=float)
        states = np.asarray(self.states)
        if costs.ndim != 1 or costs.size < 2:
            raise DomainError("need at least two cost samples")
        if len(states) != costs.size:
            raise DomainError("states and costs must have equal length")
        if costs.min() < -1e-12 or costs.max() > 1 + 1e-12:
            raise DomainError("costs must lie in [0, 1]")
        costs = np.clip(costs, 0.0, 1.0)
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_costs(cls, costs, step: float) -> "Trajectory":
        """Trajectory whose states are just the grid indices."""
        costs = np.asarray(costs, dtype=float)
        return cls(np.arange(costs.size), costs, step)

    @classmethod
    def from_cost_function(cls, g, step: float, horizon: float) -> "Trajectory":
        n = int(round(horizon / step))
        s = np.arange(n + 1) * step
        return cls(s[:, None].copy(), np.asarray(g(s), dtype=float), step)

    @property
    def n(self) -> int:
        return self.costs.size - 1

    @property
    def horizon(self) -> float:
        return self.n * self.step

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.step


@dataclass(frozen=True)
class PayoffCurve:
    grid: np.ndarray
    values: np.ndarray


def _grid_index(X: Trajectory, s: float) -> int:
    k = int(round(s / X.step))
    if abs(k * X.step - s) > 1e-9 * max(1.0, abs(s)):
        raise AlignmentError(f"time {s} is not on the grid of step {X.step}")
    return k


def _states_equal(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype.kind in "fc" or b.dtype.kind in "fc":
        return float(np.linalg.norm(np.atleast_1d(a - b))) <= STATE_TOL
    return bool(np.array_equal(a, b))


def concatenate(X: Trajectory, s: float, Y: Trajectory) -> Trajectory:
    """X on [0, s] followed by Y restarted at time s."""
    if s < 0:
        raise DomainError("splice time must be nonnegative")
    if abs(X.step - Y.step) > 1e-12 * X.step:
        raise AlignmentError("both trajectories must share the same step")
    k = _grid_index(X, s)
    if k > X.n:
        raise InsufficientDataError(f"X covers [0, {X.horizon}], splice at {s}")
    if not _states_equal(X.states[k], Y.states[0]):
        raise ConcatenationError(f"X({s}) != Y(0)")
    states = np.concatenate([X.states[:k], Y.states])
    costs = np.concatenate([X.costs[:k], Y.costs])
    return Trajectory(states, costs, X.step)


def _cumulative(X: Trajectory) -> np.ndarray:
    c = X.costs
    return np.concatenate([[0.0], np.cumsum(0.5 * X.step * (c[1:] + c[:-1]))])


def _integral_to(X: Trajectory, t: float) -> float:
    h = X.step
    k = min(int(math.floor(t / h + 1e-9)), X.n)
    c = X.costs
    total = 0.5 * h * (c[:k].sum() + c[1 : k + 1].sum())
    r = t - k * h
    if r > 1e-12 * max(1.0, t) and k < X.n:
        gr = c[k] + (c[k + 1] - c[k]) * r / h
        total += 0.5 * r * (c[k] + gr)
    return float(total)


def gamma_t(X: Trajectory, t: float) -> float:
    """(1/t) * integral_0^t g(X(s)) ds, composite trapezoid."""
    if t <= 0:
        raise DomainError("t must be positive")
    if t > X.horizon * (1 + 1e-12):
        raise InsufficientDataError(f"trajectory covers [0, {X.horizon}], t={t}")
    return min(1.0, max(0.0, _integral_to(X, t) / t))


def gamma_lambda(X: Trajectory, lam: float, tail_tol: float = 1e-6) -> float:
    """lam * integral_0^inf exp(-lam s) g(X(s)) ds.

    The linearly interpolated costs are integrated against the exponential
    exactly on the sampled horizon H; beyond H the last cost sample is
    held, which is within the tail bracket [0, exp(-lam H)].
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    tail = math.exp(-lam * X.horizon)
    if tail > tail_tol:
        raise InsufficientDataError(
            f"tail mass exp(-lam H) = {tail:.3g} exceeds tail_tol={tail_tol:.3g}"
        )
    quad = float(np.dot(exponential_weights(X.n, X.step, lam), X.costs))
    return float(quad + tail * X.costs[-1])


def payoff_curve(X: Trajectory) -> PayoffCurve:
    """Running averages gamma_s(X) at every grid point s_k, k >= 1."""
    cum = _cumulative(X)
    grid = X.times[1:]
    return PayoffCurve(grid, np.clip(cum[1:] / grid, 0.0, 1.0))


def window_average(X: Trajectory, start: float, length: float) -> float:
    """(1/length) * integral_start^{start+length} g(X(s)) ds."""
    if length <= 0:
        raise DomainError("window length must be positive")
    return (_integral_to(X, start + length) - _integral_to(X, start)) / length


def good_window_time(X: Trajectory, t: float, eps: float, v_ref: float) -> float:
    """Start L of a window after which every running average stays below v_ref + eps.

    L is the last grid time s in (0, t] with gamma_s(X) > v_ref + eps, or 0
    when there is none. Requires gamma_t(X) <= v_ref + eps/2.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if t > X.horizon * (1 + 1e-12):
        raise InsufficientDataError(f"trajectory covers [0, {X.horizon}], t={t}")
    if gamma_t(X, t) > v_ref + eps / 2 + 1e-12:
        raise ContractError("play is not eps/2-optimal for the reference value")
    k_t = min(int(math.floor(t / X.step + 1e-9)), X.n)
    curve = payoff_curve(X)
    vals = curve.values[:k_t]
    above = np.nonzero(vals > v_ref + eps)[0]
    if above.size == 0:
        return 0.0
    return float(curve.grid[above[-1]])


def trajectory_csv(X: Trajectory) -> str:
    """CSV dump with header ``s,state...,cost``."""
    st = np.asarray(X.states)
    if st.ndim == 1:
        st = st[:, None]
    d = st.shape[1]
    names = ["state"] if d == 1 else [f"state{i}" for i in range(d)]
    buf = io.StringIO()
    buf.write(",".join(["s", *names, "cost"]) + "\n")
    for s, row, c in zip(X.times, st, X.costs):
        cells = [repr(float(s))]
        cells += [repr(float(v)) if np.asarray(v).dtype.kind in "fc" else str(v) for v in row]
        cells.append(repr(float(c)))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
