"""
Long horizons and small discounts disagree
==========================================

Double integrator x' = y, y' = u with u in [0, 1], cost 0 while x is in
[1, 2] and 1 elsewhere. From rest at the origin, the best play pushes
briefly, then coasts through the band. Over a horizon t the best average
tends to 1/2; with discount lam it tends to 3/4.
"""

import math

from tauberlab.control import (
    SearchConfig,
    analytic_V,
    analytic_W,
    counterexample,
    estimate_Vlambda,
    estimate_Vt,
    one_switch_gamma_lambda,
    one_switch_gamma_t,
)

p = counterexample()

for t in (1e2, 1e3, 1e4):
    est = estimate_Vt(p, (0, 0), t)
    print(f"t={t:>7g}  V_t ~ {est.value:.6f}  switch at {est.witness.breakpoints}  "
          f"push-then-coast at 2/t: {one_switch_gamma_t(2 / t, t):.6f}")

for lam in (1e-1, 1e-2, 1e-3):
    est = estimate_Vlambda(p, (0, 0), lam)
    print(f"lam={lam:<6g} V_lam ~ {est.value:.6f}  "
          f"push until lam/ln2: {one_switch_gamma_lambda(lam / math.log(2), lam):.6f}")

print("\nlimits from rest at x0:")
for x0 in (0.0, 0.25, 0.5, 0.9, 1.5):
    print(f"  x0={x0:<4}  V={analytic_V(x0, 0):.6f}  W={analytic_W(x0, 0):.6f}")

# any motion at all ends in cost 1 forever
cfg = SearchConfig(pieces=4)
print("\nat x=1: resting", estimate_Vt(p, (1.0, 0.0), 1e3, cfg).value,
      " moving at 0.01:", round(estimate_Vt(p, (1.0, 0.01), 1e3, cfg).value, 6))
