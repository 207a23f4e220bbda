"""Maps, holes and the cells that survive.

Run with ``python demos/01_maps_and_survivors.py``.
"""
# %%
import numpy as np

from qemlab import CellPartition, build_map, survivor_cells
from qemlab.dynamics import attracting_cycle
from qemlab.oracle import survivor_intervals

# %% [markdown]
# The map zoo holds the doubling map, the logistic family, the Boole map and a
# planar quadratic map.  A hole is an open set; orbits entering it are removed.

# %%
doubling = build_map("doubling", hole=[(0.75, 1.0)])
print("T(0.3) =", float(doubling.step(0.3)), " |T'| =", float(doubling.deriv(0.3)))

# %% [markdown]
# Survivor cells: a cell is kept while at least one of its sample points has
# avoided the hole for ``n`` steps.  For dyadic cells the cover equals the
# exact union of surviving cylinders.

# %%
for n in range(5):
    p = CellPartition(doubling.state_space, 2 ** (n + 3))
    cells = survivor_cells(doubling, p, n)
    exact = survivor_intervals(doubling, n)
    print(f"n={n}: {cells.size:3d} of {p.n_cells} cells, "
          f"exact survivor length {np.sum(exact[:, 1] - exact[:, 0]):.4f}, "
          f"cover length {cells.size / p.n_cells:.4f}")

# %% [markdown]
# The logistic map at a = 3.83 has an attracting 3-cycle.  A small ball around
# it is the hole; what survives is the fixed point 0 plus a Cantor repeller.

# %%
logistic = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
print("attracting cycle:", np.round(attracting_cycle(logistic, 3), 7))
p = CellPartition(logistic.state_space, 4096)
for n in (0, 10, 20, 40):
    print(f"depth {n:2d}: {survivor_cells(logistic, p, n).size} cells")
