"""
The mixing density behind discounting
=====================================

A discounted payoff is an average of running averages, weighted by
mu_lam(s) = lam^2 s exp(-lam s). Most of that weight sits on horizons of
order 1/lam, which is why small discounts and long horizons are related.
"""

import numpy as np

from tauberlab.kernel import (
    convexity_sides,
    lemma_i_margin,
    lemma_ii_margin,
    locate_eps0,
    mass,
    mu_density,
)
from tauberlab.means import square_wave
from tauberlab.plays import Trajectory

lam = 0.1
s = np.linspace(0, 60, 7)
print("mu_0.1 at s =", s, "->", np.round(mu_density(lam, s), 5))
print("mass on [5, 20]:", round(mass(lam, 5, 20), 6), " total:", mass(lam, 0.0))

# a fixed share of the weight lies on [(1 - eps) t, t] for lam = 1/t, whatever t is
for t in (1.0, 100.0, 1e6):
    m = lemma_i_margin(t, 0.1)
    print(f"t={t:>9}: M((1-eps)t, t; 1/t) = {m.mass_value:.6f} >= {m.bound:.6f}")
print("lemma i holds up to eps =", locate_eps0(upper=0.99))

# with lam = 1/(t sqrt(eps)) nearly all weight sits on [eps t, (1 - eps) t]
for eps in (1e-2, 1e-3, 1e-4):
    print(f"eps={eps:g}: mass {lemma_ii_margin(10.0, eps, 0.01).mass_value:.6f}")

X = Trajectory.from_cost_function(square_wave(), 0.01, 200.0)
d, m, tail = convexity_sides(X, lam, 200.0)
print(f"square wave: discounted {d:.6f}, mixture of averages {m:.6f}, tail <= {tail:.1e}")
