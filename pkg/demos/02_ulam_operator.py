"""Discretizing the noisy transfer operator.

Run with ``python demos/02_ulam_operator.py``.
"""
# %%
import numpy as np

from qemlab import CellPartition, NoiseKernel, assemble, build_map, dual
from qemlab.dynamics import geometric_weight

# %% [markdown]
# Each row of the matrix is the probability that one noisy step from a cell
# lands in each other cell, computed from exact box overlaps at three Gauss
# nodes per cell.  Mass landing in the hole is lost, so rows near it sum to
# less than one.

# %%
m = build_map("doubling")
p = CellPartition(m.state_space, 4)
print(np.round(assemble(m, NoiseKernel(1e-6), None, p).matrix.toarray(), 6))

# %%
m = build_map("doubling", hole=[(0.5, 0.75)])
p = CellPartition(m.state_space, 64)
op = assemble(m, NoiseKernel(1e-2), None, p)
rs = op.row_sums()
print("active cells:", op.n, " smallest row sum:", rs.min().round(4),
      " rows losing mass:", int(np.sum(rs < 1 - 1e-12)))

# %% [markdown]
# A weight multiplies rows by exp(phi) at the nodes.  The dual operator is the
# volume-weighted transpose, and pairs with the original exactly.

# %%
logistic = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
p = CellPartition(logistic.state_space, 1024)
op = assemble(logistic, NoiseKernel(1e-3), geometric_weight(logistic, 0.5), p)
L = dual(op)
rng = np.random.default_rng(0)
f, g = rng.standard_normal((2, op.n))
lhs = np.sum(op.volumes * (L.matrix @ f) * g)
rhs = np.sum(op.volumes * f * (op.matrix @ g))
print(f"<Lf, g> - <f, Pg> = {lhs - rhs:.2e}")
