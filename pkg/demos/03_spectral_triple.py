"""Growth rate, eigenvectors and the quasi-ergodic measure.

Run with ``python demos/03_spectral_triple.py``.
"""
# %%
import math

import numpy as np

from qemlab import (CellPartition, NoiseKernel, UlamOperator, assemble, build_map,
                    quasi_ergodic, solve_triple)
from qemlab.oracle import exact_conditioned_average
from qemlab.spectral import cyclic_eigenvectors

# %% [markdown]
# On the doubling map with hole [3/4, 1) the survivors code the golden-mean
# shift, so the survival rate tends to (1 + sqrt 5) / 4 as the noise vanishes.

# %%
m = build_map("doubling", hole=[(0.75, 1.0)])
p = CellPartition(m.state_space, 4096)
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    tri = solve_triple(assemble(m, NoiseKernel(eps), None, p))
    print(f"eps={eps:g}: lambda={tri.lam:.6f}")
print("limit:", (1 + math.sqrt(5)) / 4)

# %% [markdown]
# nu = g m vol / sum is the law of a long conditioned trajectory.  On a small
# chain the exact finite-horizon average approaches it like 1/n.

# %%
rng = np.random.default_rng(1)
Q = rng.random((4, 4)) * 0.3
nu = quasi_ergodic(solve_triple(UlamOperator.from_matrix(Q))).weights
for n in (10, 100, 1000):
    avg = exact_conditioned_average(Q, None, np.eye(4)[0], n, start=0)
    print(f"n={n:4d}: time fraction in state 0 = {avg:.5f}  (nu_0 = {nu[0]:.5f})")

# %% [markdown]
# A chain that cycles through three blocks has period 3.  Power iteration on
# the cube recovers lambda, and rotated combinations of the class pieces of g
# are eigenvectors for the other peripheral eigenvalues.

# %%
A = np.zeros((6, 6))
for src, dst in [(0, 2), (2, 4), (4, 0)]:
    A[src:src + 2, dst:dst + 2] = rng.uniform(0.1, 0.5, (2, 2))
op = UlamOperator.from_matrix(A)
tri = solve_triple(op)
print("period:", tri.period, " classes:", [c.tolist() for c in tri.cyclic_classes])
for ell, f in enumerate(cyclic_eigenvectors(op, tri, tri.lam, tri.cyclic_classes)):
    mu = tri.lam * np.exp(2j * np.pi * ell / 3)
    print(f"l={ell}: |P f - mu f| = {np.max(np.abs(A @ f - mu * f)):.1e}")
