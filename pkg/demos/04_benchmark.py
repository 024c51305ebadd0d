"""
Comparing the two Gamma priors across covariance structures
===========================================================

A short version of the benchmark: every truth structure, both priors, one
replicate and short chains. The full-length run is the ``benchmark`` command.
"""

import numpy as np

from cholshrink.cli import RunConfig, benchmark_cell
from cholshrink.simulation import STRUCTURES, make_structure

cfg = RunConfig(n_iter=2000, n_burnin=1000, n_subjects=100, n_visits=8, n_responses=1,
                seed=4)

for s_idx, s in enumerate(STRUCTURES):
    print(s, np.round(make_structure(s, 8, seed=cfg.seed)[0, :4], 3), "...")

print(f"\n{'structure':>15} {'NEG':>8} {'MM':>8}")
for s_idx, s in enumerate(STRUCTURES):
    rows = benchmark_cell(cfg, s_idx, s, 0, ("neg", "mm"))
    loss = {r["prior"]: r["sel"] for r in rows}
    print(f"{s:>15} {loss['neg']:8.4f} {loss['mm']:8.4f}")
