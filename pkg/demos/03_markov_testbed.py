"""The AR(1) testbed and its finite-state stand-ins.

X_n = 0.5 X_{n-1} + Z_n has stationary law N(0, 4/3).  With V = 1 + x^2
the one-step mean PV(x) = 2 + x^2/4 is available in closed form, which
makes the drift inequality and the bound on sup_n E V(X_n) easy to see.
Finite chains give exact answers for the convergence rate and the
Poisson equation.
"""

import math

import numpy as np

from marlab import markov_engine as me

model = me.AR1Model(phi=0.5, sigma=1.0, tau=0.5)
path = me.simulate(model, 100_000, seed=3)
print(f"sample mean {path.X.mean():.4f}, variance {path.X.var():.4f} (stationary 4/3)")

c = 2 * math.sqrt(1.5)
spec = me.DriftSpec(V=me.quadratic_V(), lambda_d=0.5, b=1.5, small_set=(-c, c))
dr = me.drift_margin(model, spec, np.linspace(-10, 10, 2001))
print(f"drift margin on [-10, 10]: {dr.margin:.4f} at x = {dr.argmin}")
mb = me.stationary_moment_bound(model, spec, 30, 20_000, seed=4)
print(f"sup_n E V(X_n) ~ {mb.sup_estimate:.3f} +- {mb.std_error:.3f}, bound {mb.bound}")

chain = me.FiniteChain.two_state(0.3, 0.2)
er = me.ergodicity_rate(chain)
print(f"\ntwo-state chain a=0.3, b=0.2: rho = {er.rho}, fitted prefactor {er.prefactor:.3f}")
sol = me.poisson_solve_finite(chain, [1.0, 0.0])
print(f"Poisson solution g = {sol.g}, series agrees to {sol.agreement:.1e}")

rng = np.random.default_rng(0)
chain = me.FiniteChain.random(6, rng)
sol = me.poisson_solve_finite(chain, rng.standard_normal(6))
print(f"random 6-state chain: residuals {sol.residual_solve:.1e} (solve), "
      f"{sol.residual_series:.1e} (series, {sol.n_terms} terms)")
