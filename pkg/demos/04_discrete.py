"""
Finite graphs: both values converge to the cheapest reachable cycle
===================================================================

On a finite deterministic graph v_n and v_lam share a limit, the minimum
mean of a cycle reachable from the start. The gap shrinks like 1/n.
"""

import numpy as np

from tauberlab.discrete import (
    min_mean_cycle_all,
    parse_graph,
    random_graph,
    tauberian_gap,
    value_lambda,
    value_n,
)

g = parse_graph("""
# two cycles reachable from state 0
0 1.0 1 3
1 0.5 2
2 0.7 1
3 0.2 4
4 0.4 3
""")
print("cycle limits:", min_mean_cycle_all(g))
for n in (1, 2, 10, 1000):
    print(f"v_{n:<5}(0) = {value_n(g, n)[0]:.6f}")
for lam in (0.5, 0.1, 0.001):
    print(f"v_lam={lam:<6}(0) = {value_lambda(g, lam)[0]:.6f}")

rng = np.random.default_rng(7)
p = random_graph(40, rng)
rep = tauberian_gap(p, [10, 100, 1000, 10_000])
print("\n   n   |v_n - lim|  |v_1/n - lim|  |v_n - v_1/n|   2N/n")
for n, a, b, c, bound, _ in rep.rows:
    print(f"{n:>6}  {a:11.2e}  {b:12.2e}  {c:12.2e}  {bound:7.3f}")
