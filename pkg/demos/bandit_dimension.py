"""Two-point bandit feedback: regret against dimension at a fixed horizon.

Only loss values at two perturbed points are observed per node and round,
so the gradient estimate's variance (and the regret) grows with d.
"""

from __future__ import annotations

from odcmd import load_preset, sweep

config = load_preset("fig7").with_overrides({"stream.T": [400]})

for r in sweep(config, threads=2):
    d = r.params["stream.d"]
    print(f"d={d:3d}  max regret {r.report.max:.4f}  infeasible queries {r.record.query_violations}")
