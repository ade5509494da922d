"""Does c_n M[n, n] go to zero?  Rate diagnostics and trajectories.

The sufficient conditions involve moments of the extended sums and of
the row increments; we estimate them on a grid n = 2^k and read off
log-log slopes.  For the +-1 walk with c_n = 1/n the first term decays
like 1/n.  For the kernel-regression array (bandwidth n^-0.2, weights
n^-0.8) the rows change with n and the increment series is non-trivial.
"""

import numpy as np

from marlab import arrays
from marlab.arrays import WeightSchedule
from marlab.kernel_regression import ChainKernelArray
from marlab.slln_diagnostics import corollary1_terms, diagonal_paths

rep = corollary1_terms(arrays.rademacher_nested(), WeightSchedule.power(1.0), horizon=4096,
                       replicates=1000, seed=0)
print("+-1 walk, c_n = 1/n")
for k, v in rep.slopes.items():
    print(f"  slope {k:<14} {v: .3f}")

rep = corollary1_terms(ChainKernelArray(), WeightSchedule.power(0.8), horizon=4096,
                       replicates=1000, seed=0)
print("\nkernel-regression array, c_n = n^-0.8")
for k, v in rep.slopes.items():
    print(f"  slope {k:<14} {v: .3f}")
print("  partial sums of c_n E^(1/2) R_n^2 at the last grid points:",
      np.round(rep.r_partial_sum[-3:], 4))

print()
dp = diagonal_paths(arrays.rademacher_nested(), WeightSchedule.power(1.0), list(range(100)),
                    100_000)
for n in (100, 1000, 10_000):
    sup = dp.at(n)
    print(f"+-1 walk: sup_(m >= {n}) |M_m|/m  median {np.median(sup):.4f}, "
          f"{np.mean(sup < 0.05):.0%} of seeds below 0.05")
