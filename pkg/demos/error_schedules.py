"""How prox inaccuracy shows up in regret.

Decaying errors c/t^1.5 with larger c cost more; a fixed error of 0.5
never goes away and dominates everything else.
"""

from __future__ import annotations

from odcmd import load_preset, sweep

config = load_preset("fig3").with_overrides({"stream.T": [400]})

for r in sweep(config, threads=2):
    label = ", ".join(f"{k.split('.')[-1]}={v}" for k, v in r.params.items())
    print(f"{label:32s} max regret {r.report.max:.4f}")
