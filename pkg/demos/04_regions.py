"""Recurrent and transient regions of the logistic map.

Run with ``python demos/04_regions.py``.
"""
# %%
import numpy as np

from qemlab import CellPartition, NoiseKernel, assemble, build_map, solve_triple
from qemlab.regions import build_regions, restrict, support_localization
from qemlab.spectral import spectral_radius

# %% [markdown]
# With the hole around the attracting cycle, noise of size 5e-4 leaves two
# regions that hold mass indefinitely: the neighbourhood of the fixed point 0
# and the Cantor repeller.  The Cantor class has the larger restricted growth
# rate and so dominates the global problem.

# %%
m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
p = CellPartition(m.state_space, 8192)
op = assemble(m, NoiseKernel(5e-4), None, p)
graph = build_regions(op, p)
print(graph.summary())
print(graph.to_dot())

# %%
origin = graph.class_of_cell(0)
cantor = graph.class_of_cell(int(p.locate(0.524)))
print("origin class", origin, "lambda", graph.class_lambda[origin].round(4))
print("Cantor class", cantor, "lambda", graph.class_lambda[cantor].round(6))

# %% [markdown]
# The global eigenvectors respect the class graph: m vanishes on classes that
# feed the dominant one, g on classes it feeds.

# %%
tri = solve_triple(op)
print(support_localization(graph, tri))
print("global lambda", round(tri.lam, 6),
      " restricted to Cantor", round(spectral_radius(restrict(op, graph, cantor)), 6))
