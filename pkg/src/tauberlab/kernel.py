"""The mixing density mu_lam(s) = lam^2 s exp(-lam s) and its interval masses.

The discounted payoff of a play is the mu_lam-average of its running
averages; ``convexity_residual`` measures that identity numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DomainError, InsufficientDataError

__all__ = [
    "KernelMass",
    "Margin",
    "mu_density",
    "mass",
    "mass_quadrature",
    "lemma_i_margin",
    "lemma_ii_margin",
    "lemma_i_closed_form",
    "lemma_ii_closed_form",
    "locate_eps0",
    "convexity_residual",
    "convexity_sides",
]


@dataclass(frozen=True)
class KernelMass:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")


LamLike = Union[KernelMass, float]


def _lam(k: LamLike) -> float:
    if isinstance(k, KernelMass):
        return k.lam
    lam = float(k)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return lam


class Margin(NamedTuple):
    mass_value: float
    bound: float
    passed: bool


def mu_density(k: LamLike, s):
    """lam^2 * s * exp(-lam * s); accepts scalars or arrays of s >= 0."""
    lam = _lam(k)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("s must be nonnegative")
    out = lam * lam * s_arr * np.exp(-lam * s_arr)
    return float(out) if out.ndim == 0 else out


def _upper_tail(lam: float, a: float) -> float:
    # M(a, inf; lam)
    if math.isinf(a):
        return 0.0
    return math.exp(-lam * a) * (1.0 + lam * a)


def mass(k: LamLike, alpha: float, beta: float = math.inf) -> float:
    """M(alpha, beta; lam) = integral of mu_lam over [alpha, beta]."""
    lam = _lam(k)
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    if alpha > beta:
        raise DomainError("alpha must not exceed beta")
    if alpha == beta:
        return 0.0
    return _upper_tail(lam, alpha) - _upper_tail(lam, beta)


def mass_quadrature(k: LamLike, alpha: float, beta: float, nodes: int = 64) -> float:
    """Gauss-Legendre quadrature of mu_lam on [alpha, beta], split into unit-scale panels."""
    lam = _lam(k)
    if alpha > beta:
        raise DomainError("alpha must not exceed beta")
    if alpha == beta:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    # panels of width <= 1/lam keep the integrand well resolved
    n_pan = max(1, int(math.ceil((beta - alpha) * lam)))
    edges = np.linspace(alpha, beta, n_pan + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        s = mid + half * x
        total += half * float(np.dot(w, lam * lam * s * np.exp(-lam * s)))
    return total


def lemma_i_closed_form(eps: float) -> float:
    return (2.0 - eps) * math.exp(-1.0 + eps) - 2.0 * math.exp(-1.0)


def lemma_ii_closed_form(eps: float) -> float:
    """M(eps t, (1-eps) t; 1/(t sqrt(eps))), which does not depend on t.

    With r = sqrt(eps) the endpoints scale to r and 1/r - r, so the value is
    (1 + r) e^{-r} - (1 + 1/r - r) e^{-1/r + r}.
    """
    r = math.sqrt(eps)
    return (1.0 + r) * math.exp(-r) - (1.0 + 1.0 / r - r) * math.exp(-1.0 / r + r)


def _check_unit(name: str, x: float) -> None:
    if not 0.0 < x < 1.0:
        raise DomainError(f"{name} must lie in (0, 1)")


def lemma_i_margin(t: float, eps: float) -> Margin:
    """M((1-eps) t, t; 1/t) against eps / (2e). The mass does not depend on t."""
    if t <= 0:
        raise DomainError("t must be positive")
    _check_unit("eps", eps)
    m = mass(1.0 / t, (1.0 - eps) * t, t)
    b = eps / (2.0 * math.e)
    return Margin(m, b, m >= b)


def lemma_ii_margin(t: float, eps: float, delta: float) -> Margin:
    """M(eps t, (1-eps) t; 1/(t sqrt(eps))) against 1 - delta."""
    if t <= 0:
        raise DomainError("t must be positive")
    _check_unit("eps", eps)
    _check_unit("delta", delta)
    if eps >= 0.5:
        # the interval [eps t, (1-eps) t] is empty
        m = 0.0
    else:
        m = mass(1.0 / (t * math.sqrt(eps)), eps * t, (1.0 - eps) * t)
    b = 1.0 - delta
    return Margin(m, b, m >= b)


def locate_eps0(upper: float = 0.5, tol: float = 1e-12) -> float:
    """Largest eps in (0, upper] such that lemma_i_margin passes on (0, eps].

    Empirical threshold from bisection on the closed form. Returns ``upper``
    when the margin holds on the whole range.
    """
    ok = lambda e: lemma_i_closed_form(e) >= e / (2.0 * math.e)
    grid = np.linspace(upper / 1000.0, upper, 1000)
    bad = [e for e in grid if not ok(e)]
    if not bad:
        return float(upper)
    lo, hi = 0.0, float(bad[0])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _subsample(X, h):
    if h is None or abs(h - X.step) <= 1e-12 * X.step:
        return X.costs, X.step
    factor = h / X.step
    m = int(round(factor))
    if m < 1 or abs(m - factor) > 1e-9 * factor:
        raise DomainError("h must be an integer multiple of the trajectory step")
    return X.costs[::m], X.step * m


def convexity_sides(X, lam: float, s_max: float, h=None, tail_tol: float = 1e-6):
    """Both sides of gamma_lam(X) = integral gamma_s(X) mu_lam(ds), with tails.

    Returns ``(discounted, mixture, tail_bound)``. Each side is a trapezoid
    sum on [0, s_max] plus a tail that freezes the last cost sample
    (discounted side) or the last running average (mixture side).
    """
    lam = _lam(lam)
    if s_max > X.horizon * (1 + 1e-12):
        raise InsufficientDataError(f"trajectory covers [0, {X.horizon}], s_max={s_max}")
    tail_bound = _upper_tail(lam, s_max)
    if tail_bound > tail_tol:
        raise InsufficientDataError(
            f"M(s_max, inf) = {tail_bound:.3g} exceeds tail_tol={tail_tol:.3g}; lengthen s_max"
        )
    g, step = _subsample(X, h)
    n = int(math.floor(s_max / step + 1e-9))
    g = g[: n + 1]
    s = np.arange(n + 1) * step
    S = n * step

    w = lam * np.exp(-lam * s) * g
    discounted = step * (w.sum() - 0.5 * (w[0] + w[-1])) + math.exp(-lam * S) * g[-1]

    cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (g[1:] + g[:-1]))])
    gamma = np.empty_like(cum)
    gamma[0] = g[0]  # right limit at s = 0
    gamma[1:] = cum[1:] / s[1:]
    m = lam * lam * s * np.exp(-lam * s) * gamma
    mixture = step * (m.sum() - 0.5 * (m[0] + m[-1])) + _upper_tail(lam, S) * gamma[-1]
    return float(discounted), float(mixture), float(tail_bound)


def convexity_residual(X, lam: float, s_max: float, h=None, tail_tol: float = 1e-6) -> float:
    """|gamma_lam(X) - integral gamma_s(X) mu_lam(ds)| from ``convexity_sides``."""
    d, m, _ = convexity_sides(X, lam, s_max, h, tail_tol)
    return abs(d - m)
