"""Particle estimates of conditioned time averages.

Run with ``python demos/06_monte_carlo.py``.
"""
# %%
import numpy as np

from qemlab import (CellPartition, NoiseKernel, assemble, build_map, quasi_ergodic,
                    run_conditioned, solve_triple, survival_curve, survival_rate)

# %% [markdown]
# Particles carry exp(S_n phi) in log space and die in the hole.  When the
# effective sample size halves, the ensemble is resampled and the mean weight
# folds into a running normalization whose growth estimates lambda.

# %%
m = build_map("doubling", hole=[(0.5, 0.75)])
eps = 1e-3
p = CellPartition(m.state_space, 4096)
tri = solve_triple(assemble(m, NoiseKernel(eps), None, p))
nu = quasi_ergodic(tri)
centers = p.centers()[tri.cells]
print("spectral  integral of x:", round(nu.integrate(centers), 4))
est = run_conditioned(m, NoiseKernel(eps), None, lambda x: x, n=100, N=100_000, seed=0)
print(f"particles integral of x: {est.value:.4f} +- {est.stderr:.4f} "
      f"({est.islands} islands, {est.resamples} resamples)")

# %% [markdown]
# Unweighted survival decays at the rate lambda.

# %%
m = build_map("doubling", hole=[(0.75, 1.0)])
curve = survival_curve(m, NoiseKernel(eps), None, 40, 500_000, seed=0)
tri = solve_triple(assemble(m, NoiseKernel(eps), None, p))
print(f"fitted rate {survival_rate(curve, min_count=1e-5):.4f}, spectral {tri.lam:.4f}")
print("survival:", np.round(curve[::8], 5))
