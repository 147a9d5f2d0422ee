"""
From continuous time to a graph
===============================

Cut plays into unit intervals and remember where each unit ended and what
it cost on average. With a finite family of unit controls, the reachable
(state, unit cost) pairs form a finite graph. Its n-step value tracks V_t
within 2/n and its discounted value tracks V_lam within the kernel gap.
"""

import math

from tauberlab.bridge import (
    bang_family,
    discount_error_audit,
    discretize,
    full_gap,
    horizon_error_audit,
    kernel_gap,
)
from tauberlab.control import counterexample

for lam in (0.5, 0.1, 0.01, 0.001):
    E, bound, ok = kernel_gap(lam)
    print(f"lam={lam:<6} E={E:.3e}  e^lam-1={bound:.3e}  full gap={full_gap(lam):.3e}")

bp = discretize(counterexample(), (0.0, 0.0), bang_family(32), depth=256, quant=1 / 2048)
print(f"\n{bp.n_nodes} product states, {bp.discrete.n_edges} edges, closed={bp.closed}")
print("first units from the origin:", bp.successors(0)[:3])

print()
print(horizon_error_audit(bp, [5, 10, 20, 30]).to_csv())
print(discount_error_audit(bp, [0.5, 0.2, 0.1, 0.05]).to_csv())
print("v_lam at 0.01 on the graph:", round(bp.value_lambda(0.01), 4),
      "(unit controls switch on a 1/32 grid; the best switch lam/ln2 =",
      round(0.01 / math.log(2), 4), "is finer than that)")
