"""Average regret of full-information ODCMD as the horizon grows.

Each horizon is a fresh run on the 30-node alternating network. The
log-log slope of max regret against T should sit near -1/2.
"""

from __future__ import annotations

import numpy as np

from odcmd import load_preset, sweep

config = load_preset("fig2").with_overrides({
    "error.kind": "exact",
    "stream.T": [100, 200, 400, 800, 1600],
    "sweep.cases": [],
})

results = sweep(config, threads=2)
T = np.array([r.T for r in results])
worst = np.array([r.report.max for r in results])

for t, w, r in zip(T, worst, results):
    print(f"T={t:5d}  max regret {w:.4f}  min regret {r.report.min:.4f}")

slope = np.polyfit(np.log(T), np.log(worst), 1)[0]
print(f"log-log slope: {slope:.3f}")
