"""
Cesaro and Abel means of bounded sequences
==========================================

A periodic sequence has both means equal to its period average. The dyadic
block sequence (runs of 1s and 0s of doubling length) has running averages
that keep swinging between about 1/3 and 2/3, while over the same range
its Abel means stay within a few 1e-4 of 1/2.
"""

import math

from tauberlab.means import (
    BoundedSequence,
    SampledFunction,
    abel_mean,
    cesaro_mean,
    discounted_average,
    dyadic_block_sequence,
    hardy_littlewood_report,
    square_wave,
    time_average,
)

alt = BoundedSequence.periodic([1.0, 0.0])
for n in (10, 1001, 100_000):
    print(f"alternating  n={n:>6}  cesaro={cesaro_mean(alt, n):.6f}")
for lam in (0.1, 0.01, 0.001):
    # closed form 1/(2 - lam)
    print(f"alternating  lam={lam:<6} abel={abel_mean(alt, lam):.6f}  exact={1 / (2 - lam):.6f}")

# the dyadic blocks never settle
seq = dyadic_block_sequence()
n_grid = [2**k for k in range(4, 21)]
rep = hardy_littlewood_report(seq, n_grid, [2.0**-k for k in range(4, 18)])
for kind in ("liminf_cesaro", "limsup_cesaro", "liminf_abel", "limsup_abel"):
    print(f"dyadic {kind:>14}: {rep.where(kind=kind)[0]['value']:.4f}")

# continuous time: square wave of period 2, 1 on the first half
f = SampledFunction.from_callable(square_wave(), 1e-3, 200.0)
print("time average over [0, 200]:", round(time_average(f, 200.0), 6))
for lam in (0.5, 0.1):
    exact = 1 / (1 + math.exp(-lam))
    print(f"discounted lam={lam}: {discounted_average(f, lam):.6f}  exact={exact:.6f}")
