"""Maximal inequalities, checked exactly and by simulation.

For a +-1 random walk and weights c_m = 1/m we enumerate all 2^N sign
paths and compare the two sides of the array maximal inequality over a
grid of thresholds.  Then we switch to an array whose rows drift with n,
where the row-increment term on the right becomes active, and finally
to Gaussian increments where only Monte Carlo is available.
"""

import numpy as np

from marlab import arrays
from marlab.arrays import WeightSchedule
from marlab.inequality_lab import (MONTE_CARLO, burkholder_check, burkholder_constant,
                                   cbm_bound, thm2_sweep)

w = WeightSchedule.power(1.0, p=2)

print("nested +-1 walk, N = 3, exact")
rep = cbm_bound(arrays.rademacher_nested(), w, 1, 3)
print(f"  single martingale: P(max c_m |S_m| >= 1) = {rep.lhs}  <=  {rep.rhs:.6f} (= 49/36)")
for r in thm2_sweep(arrays.rademacher_nested(), w, 1, 3, [0.25, 0.5, 1.0]):
    print(f"  lambda={r.lam:<5} lhs={r.lhs:.4f} rhs={r.rhs:.4f} terms={np.round(r.terms, 4)}")

print("\nrows that drift with n (tilted weights), N = 12, exact over 4096 paths")
tilted = arrays.tilted_array(gamma=0.5, a=0.5)
for r in thm2_sweep(tilted, WeightSchedule.power(0.8, p=2), 2, 12, np.geomspace(0.1, 3, 5)):
    print(f"  lambda={r.lam:6.3f} lhs={r.lhs:.4f} rhs={r.rhs:.4f} "
          f"(increment term {r.terms[2]:.4f})")

print("\nGaussian increments, N = 50, 10^5 Monte Carlo paths")
rep = cbm_bound(arrays.NestedIID(), WeightSchedule.power(0.8, p=2), 1, 50, mode=MONTE_CARLO,
                replicates=100_000, seed=1)
print(f"  lhs={rep.lhs:.4f} rhs={rep.rhs:.4f} std error of difference {rep.std_error:.2e}")

print("\nmoment bound E|M|^p <= C k^(max(p/2,1)-1) sum E|D|^p")
print(f"  C(2) = {burkholder_constant(2)}")
rep = burkholder_check(arrays.rademacher_nested(), 2, 3, 3)
print(f"  +-1 walk, k=3: {rep.lhs:.1f} <= {rep.rhs:.1f}  (the constant is very loose)")
