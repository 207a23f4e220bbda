"""An epsilon sweep toward the zero-noise limit, as the ``sweep`` command runs it.

Run with ``python demos/07_zero_noise_sweep.py``; the same thing from the
shell is ``qemlab sweep --config configs/doubling_golden.toml --out runs/golden``.
"""
# %%
from pathlib import Path

from qemlab.cli import load_config, run_sweep

root = Path(__file__).resolve().parents[1]

# %%
for name in ("doubling_golden.toml", "logistic_global.toml"):
    cfg = load_config(root / "configs" / name)
    report = run_sweep(cfg)
    print(f"\n{name}: reference pressure {report.reference['pressure']:.6f}")
    for r in report.rows:
        print(f"  eps={r.epsilon:<8g} log lambda={r.log_lambda:+.6f} classes={r.n_classes} "
              f"recurrent={r.n_recurrent} W1={r.w1_distance_to_reference:.2e}")
    print(f"  converged={report.converged} final gap={report.final_gap:.2e}")
