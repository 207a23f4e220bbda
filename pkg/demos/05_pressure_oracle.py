"""Topological pressure and equilibrium states on Markov models.

Run with ``python demos/05_pressure_oracle.py``.
"""
# %%
import math

from qemlab import build_map, geometric_weight
from qemlab.oracle import (GOLDEN_LOG, fixed_point_model, golden_mean_model,
                           logistic_repeller_model, pressure)

# %% [markdown]
# The golden-mean shift with the doubling-map potential -log 2.

# %%
eq = pressure(golden_mean_model())
print(f"pressure {eq.pressure:.10f}  log((1+sqrt5)/4) {math.log((1 + 5 ** 0.5) / 4):.10f}")
print(f"entropy  {eq.entropy:.10f}  log golden ratio {GOLDEN_LOG:.10f}")
print("measure on cylinders 00, 01, 10:", eq.measure.round(6))

# %% [markdown]
# The logistic repeller, modelled by its depth-n survivor intervals.  At t = 0
# the pressure is the topological entropy; at t = 1 it is minus the escape
# rate of Lebesgue measure.

# %%
for depth in (8, 10, 12, 14):
    model = logistic_repeller_model(3.83, depth=depth)
    print(f"depth {depth}: {model.n_states:5d} states, entropy {pressure(model).entropy:.6f}")
for t in (0.0, 0.5, 1.0):
    eq = pressure(logistic_repeller_model(3.83, depth=12, t=t))
    print(f"t={t}: pressure {eq.pressure:+.6f}, variational gap {eq.variational_gap:.1e}")

# %% [markdown]
# The fixed point 0 alone has pressure -t log a.

# %%
m = build_map("logistic", {"a": 3.83})
for t in (0.0, 1.0, 2.0):
    print(t, pressure(fixed_point_model(m, 0.0, geometric_weight(m, t))).pressure,
          -t * math.log(3.83))
