"""Cesaro and Abel means of bounded sequences and of bounded functions of time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .report import ValueReport

__all__ = [
    "BoundedSequence",
    "SampledFunction",
    "cesaro_mean",
    "cesaro_means",
    "abel_mean",
    "abel_truncation_index",
    "time_average",
    "discounted_average",
    "hardy_littlewood_report",
    "dyadic_block_sequence",
    "square_wave",
    "exponential_weights",
]


@dataclass(frozen=True)
class BoundedSequence:
    """A real sequence a_1, a_2, ... with values in ``bound``.

    ``values`` holds an explicit prefix. ``generator`` (optional) maps an
    array of 1-based indices to the corresponding terms and is used for
    every index past the prefix.
    """

    values: tuple = ()
    generator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bound: tuple = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = self.bound
        if lo > hi:
            raise DomainError(f"empty bound {self.bound}")
        v = np.asarray(self.values, dtype=float)
        if v.size and (v.min() < lo or v.max() > hi):
            raise DomainError("sequence prefix leaves its declared bound")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def periodic(cls, pattern: Sequence[float], bound=None) -> "BoundedSequence":
        pat = np.asarray(pattern, dtype=float)
        if pat.size == 0:
            raise DomainError("empty pattern")
        if bound is None:
            bound = (float(pat.min()), float(pat.max()))
        return cls(values=(), generator=lambda i: pat[(i - 1) % pat.size], bound=bound)

    @classmethod
    def constant(cls, c: float) -> "BoundedSequence":
        return cls(generator=lambda i: np.full(np.shape(i), float(c)), bound=(c, c))

    @property
    def width(self) -> float:
        return self.bound[1] - self.bound[0]

    def take(self, n: int) -> np.ndarray:
        """First ``n`` terms as an array."""
        n = int(n)
        k = len(self.values)
        if n <= k:
            return np.asarray(self.values[:n], dtype=float)
        if self.generator is None:
            raise InsufficientDataError(f"sequence has {k} terms, {n} requested")
        idx = np.arange(k + 1, n + 1)
        tail = np.asarray(self.generator(idx), dtype=float)
        lo, hi = self.bound
        if tail.size and (tail.min() < lo or tail.max() > hi):
            raise DomainError("generator produced a value outside the declared bound")
        return np.concatenate([np.asarray(self.values, dtype=float), tail])


def square_wave(period: float = 2.0, duty: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    """Indicator of the first ``duty`` fraction of every period (right-continuous)."""

    def g(s):
        s = np.asarray(s, dtype=float)
        return (np.mod(s, period) < duty * period).astype(float)

    return g


def dyadic_block_sequence() -> BoundedSequence:
    """a_i = 1 for i in [4^k, 2*4^k), else 0. Its Cesaro means oscillate."""

    def gen(i):
        i = np.asarray(i, dtype=np.int64)
        # floor(log2 i) even  <=>  i in [2^{2k}, 2^{2k+1})
        e = np.floor(np.log2(i.astype(float))).astype(np.int64)
        # guard against rounding of log2 near powers of two
        e = np.where((1 << (e + 1)) <= i, e + 1, e)
        e = np.where((1 << e) > i, e - 1, e)
        return (e % 2 == 0).astype(float)

    return BoundedSequence(generator=gen, bound=(0.0, 1.0))


def cesaro_mean(seq: BoundedSequence, n: int) -> float:
    """(1/n) * sum_{i=1..n} a_i."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    a = seq.take(n)
    return float(np.clip(a.sum() / n, *seq.bound))


def cesaro_means(seq: BoundedSequence, n_grid: Sequence[int]) -> np.ndarray:
    """Cesaro means at every n of ``n_grid`` from one cumulative sum."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if n_grid.size == 0 or n_grid.min() < 1:
        raise DomainError("n_grid must hold positive integers")
    a = seq.take(int(n_grid.max()))
    csum = np.cumsum(a)
    return csum[n_grid - 1] / n_grid


def abel_truncation_index(lam: float, tail_tol: float, width: float) -> int:
    """Smallest I with (1 - lam)**I <= tail_tol / (width + 1)."""
    if lam >= 1.0:
        return 1
    target = tail_tol / (width + 1.0)
    I = math.ceil(math.log(target) / math.log1p(-lam))
    # ceil of a float quotient may land one short
    while (1.0 - lam) ** I > target:
        I += 1
    return max(I, 1)


def abel_mean(seq: BoundedSequence, lam: float, tail_tol: float = 1e-10) -> float:
    """lam * sum_i (1-lam)^(i-1) a_i, truncated with a midpoint tail estimate.

    The discarded geometric mass (1-lam)^I is filled with the midpoint of
    the bound, so the error is at most tail_tol / 2.
    """
    if not 0.0 < lam <= 1.0:
        raise DomainError("lambda must lie in (0, 1]")
    if tail_tol <= 0:
        raise DomainError("tail_tol must be positive")
    if lam == 1.0:
        return float(seq.take(1)[0])
    I = abel_truncation_index(lam, tail_tol, seq.width)
    a = seq.take(I)
    w = lam * np.power(1.0 - lam, np.arange(I))
    tail_mass = (1.0 - lam) ** I
    lo, hi = seq.bound
    return float(np.dot(w, a) + tail_mass * 0.5 * (lo + hi))


@dataclass(frozen=True)
class SampledFunction:
    """Samples g(k*h), k = 0..N, of a bounded function of time.

    ``generator`` (optional, vectorised in s) lets operations extend the
    grid past N*h when they need a longer horizon.
    """

    samples: np.ndarray
    step: float
    bound: tuple = (0.0, 1.0)
    generator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.step <= 0:
            raise DomainError("step must be positive")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise DomainError("need at least two samples on a 1-D grid")
        lo, hi = self.bound
        if s.min() < lo - 1e-12 or s.max() > hi + 1e-12:
            raise DomainError("samples leave the declared bound")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_callable(cls, g, step: float, horizon: float, bound=(0.0, 1.0), keep_generator=True):
        n = int(round(horizon / step))
        s = np.arange(n + 1) * step
        return cls(np.asarray(g(s), dtype=float), step, bound, g if keep_generator else None)

    @property
    def horizon(self) -> float:
        return (self.samples.size - 1) * self.step

    def extended(self, horizon: float) -> "SampledFunction":
        if horizon <= self.horizon:
            return self
        if self.generator is None:
            raise InsufficientDataError(
                f"function covers [0, {self.horizon}], {horizon} requested"
            )
        return SampledFunction.from_callable(self.generator, self.step, horizon, self.bound)


def _integral_to(samples: np.ndarray, h: float, t: float) -> float:
    """Composite trapezoid of the piecewise-linear interpolant over [0, t]."""
    k = int(math.floor(t / h + 1e-9))
    k = min(k, samples.size - 1)
    full = h * (samples[:k].sum() + samples[1 : k + 1].sum()) / 2.0 if k > 0 else 0.0
    r = t - k * h
    if r > 1e-12 * max(1.0, t):
        g0 = samples[k]
        g1 = samples[k + 1]
        gr = g0 + (g1 - g0) * r / h
        full += 0.5 * r * (g0 + gr)
    return float(full)


def _phi(u: np.ndarray) -> np.ndarray:
    """(1 - exp(-u)(1 + u)) / u, with a series where the subtraction cancels."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-2
    out = np.empty_like(u)
    v = u[~small]
    out[~small] = (-np.expm1(-v) - v * np.exp(-v)) / v
    w = u[small]
    # sum_{n>=2} (-1)^n (n-1) u^(n-1) / n!
    out[small] = w * (1 / 2 - w * (1 / 3 - w * (1 / 8 - w * (1 / 30 - w * (1 / 144 - w / 840)))))
    return out


def exponential_weights(n: int, h: float, lam: float) -> np.ndarray:
    """Weights w_0..w_n with sum_k w_k g_k = lam * integral_0^{n h} exp(-lam s) g(s) ds
    for the piecewise-linear interpolant of the samples g_k.

    The exponential is integrated exactly, so constants are reproduced up
    to rounding: the weights sum to 1 - exp(-lam n h).
    """
    u = lam * h
    E = np.exp(-u * np.arange(n))  # exp(-lam s_k) at interval starts
    one = -math.expm1(-u)
    p = float(_phi(np.array([u]))[0])
    w = np.zeros(n + 1)
    w[:-1] += E * (one - p)
    w[1:] += E * p
    return w


def time_average(f: SampledFunction, t: float) -> float:
    """(1/t) * integral_0^t g(s) ds by the composite trapezoid rule."""
    if t <= 0:
        raise DomainError("t must be positive")
    if t > f.horizon * (1 + 1e-12):
        f = f.extended(t)
    return _integral_to(f.samples, f.step, t) / t


def discounted_average(f: SampledFunction, lam: float, tail_tol: float = 1e-8) -> float:
    """lam * integral_0^inf exp(-lam s) g(s) ds.

    The piecewise-linear interpolant of the samples is integrated against
    the exponential exactly up to the horizon S; the remaining mass
    exp(-lam S) is filled with the midpoint of the bound. The tail bracket
    width exp(-lam S) * (hi - lo) must not exceed ``tail_tol``.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if tail_tol <= 0:
        raise DomainError("tail_tol must be positive")
    lo, hi = f.bound
    scale = max(abs(lo), abs(hi), hi - lo)
    if scale > 0 and math.exp(-lam * f.horizon) * scale > tail_tol:
        needed = math.log(scale / tail_tol) / lam
        f = f.extended(needed)
    w = exponential_weights(f.samples.size - 1, f.step, lam)
    quad = float(np.dot(w, f.samples))
    tail = math.exp(-lam * f.horizon)
    return float(quad + tail * 0.5 * (lo + hi))


def _window_extremes(values: np.ndarray) -> tuple[float, float]:
    half = values[len(values) // 2 :]
    return float(half.min()), float(half.max())


def hardy_littlewood_report(
    seq: BoundedSequence,
    n_grid: Sequence[int],
    lambda_grid: Sequence[float],
    tail_tol: float = 1e-10,
) -> ValueReport:
    """Cesaro and Abel means along the grids, with window liminf/limsup estimates.

    The estimates are the min/max over the last half of each grid; they are
    finite-window proxies, not exact limits.
    """
    n_grid = [int(n) for n in n_grid]
    lambda_grid = [float(x) for x in lambda_grid]
    if not n_grid or not lambda_grid:
        raise DomainError("grids must be nonempty")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be ascending")
    if any(b >= a for a, b in zip(lambda_grid, lambda_grid[1:])):
        raise DomainError("lambda_grid must be descending")

    rep = ValueReport("hardy_littlewood", ["kind", "param", "value"])
    vn = cesaro_means(seq, n_grid)
    for n, v in zip(n_grid, vn):
        rep.add("cesaro", float(n), float(v))
    vl = np.array([abel_mean(seq, lam, tail_tol) for lam in lambda_grid])
    for lam, v in zip(lambda_grid, vl):
        rep.add("abel", lam, float(v))
    lo_n, hi_n = _window_extremes(vn)
    lo_l, hi_l = _window_extremes(vl)
    rep.add("liminf_cesaro", float(n_grid[-1]), lo_n)
    rep.add("limsup_cesaro", float(n_grid[-1]), hi_n)
    rep.add("liminf_abel", lambda_grid[-1], lo_l)
    rep.add("limsup_abel", lambda_grid[-1], hi_l)
    return rep
