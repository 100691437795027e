#!/usr/bin/env python3
"""Print the non-payload bit budget of inversion across precisions.

The interesting claim is that overhead (pair header + precision field +
cell pointer) grows like the log of the precision while the payload
grows linearly, so the grid inverter's bookkeeping is asymptotically
free.  Run with no arguments for the standard table, or pass rungs:

    python3 scripts/overhead_sweep.py 4 8 16 32 48
"""

import sys

from fiberlab import (
    BitStream,
    compose,
    invert_enumerate,
    invert_fast,
    make_kakeya_linear,
    overhead_fit,
    sample_point,
)

rungs = [int(a) for a in sys.argv[1:]] or [4, 8, 16, 32, 48]
fib = make_kakeya_linear(2, "lipschitz:1/2")

budgets = []
print(f"{'r':>4} {'payload':>8} {'header':>7} {'r-field':>8} {'pointer':>8} {'overhead':>9}")
for r in rungs:
    pt = sample_point(fib, BitStream(1234, "sweep"), r)
    x = compose(fib, pt.label, pt.fiber, r).x_trunc
    invert = invert_enumerate if r <= 10 else invert_fast
    res = invert(fib, x, r, truth=(pt.label, pt.fiber))
    b = res.budget
    budgets.append(b)
    payload = b.payload_z + b.payload_u
    print(f"{r:>4} {payload:>8} {b.pair_header:>7} {b.r_param:>8} {b.pointer:>8} {b.overhead:>9}")

if len(set(rungs)) >= 4:
    fit = overhead_fit(budgets, rungs)
    print(
        f"\noverhead ~ {fit.slope:.3f} * log2(r) + {fit.intercept:.3f}"
        f"   (max residual {fit.max_residual:.3f} bits)"
    )
else:
    print("\n(need 4 distinct rungs for a fit)")
