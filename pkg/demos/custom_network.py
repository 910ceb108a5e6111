"""Building the pieces by hand: a ring network, an l1-regularized stream and one run.

This skips the config layer and calls the library directly.
"""

from __future__ import annotations

import numpy as np

from odcmd import (
    AlgorithmConfig, ConstraintSet, ErrorModel, MirrorMap, Regularizer, average_regret,
    build_schedule, generate_regression_stream, run_odcmd, solve_comparator, verify_connectivity,
)

m, d, T = 8, 5, 300
schedule = build_schedule("ring", m, seed=1)
report = verify_connectivity(schedule, 20)
print(f"ring: zeta={report.zeta:.4f}  B={report.window}  ok={report.ok}")

stream = generate_regression_stream(m, d, T, seed=2, lambda1=1.0)
kset = ConstraintSet.ball(1.0)
reg = Regularizer(0.1)
mirror = MirrorMap.euclidean()

cfg = AlgorithmConfig(eta=1.0 / np.sqrt(T), error=ErrorModel.exact())
record = run_odcmd(stream, schedule, mirror, kset, reg, cfg, T)
comparator = solve_comparator(stream, kset, reg)
regret = average_regret(record, comparator)
print(f"average regret per node: {np.round(regret.per_node, 4)}")
print(f"final disagreement: {regret.disagreement[-1]:.2e}")
