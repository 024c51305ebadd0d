"""
Convergence checks on a chain
=============================

Effective sample size and Geweke z-scores, first on synthetic traces where
the answer is known, then on the sampler's own output.
"""

import numpy as np

from cholshrink import FitConfig, effective_sample_size, fit, geweke_z, make_structure
from cholshrink import rng_stream, simulate_dataset
from cholshrink.diagnostics import diagnose_traces

rng = np.random.default_rng(6)
iid = rng.standard_normal(5000)
ar = np.zeros(5000)
for t in range(1, 5000):
    ar[t] = 0.9 * ar[t - 1] + rng.standard_normal()
drift = iid + np.linspace(0, 2, 5000)

for name, x in [("iid", iid), ("AR(0.9)", ar), ("drifting", drift)]:
    print(f"{name:>9}: ESS {effective_sample_size(x):7.0f}  Geweke z {geweke_z(x):+6.2f}")

# for AR(0.9) the asymptotic value is n (1 - 0.9) / (1 + 0.9), about 263; a single
# trace of this length lands somewhere in the low hundreds

data = simulate_dataset(make_structure("identity", 4), 60, 4, 1, 0.1, rng_stream(6, 0))
chain = fit(data, FitConfig(n_iter=3000, n_burnin=1000, seed=6))[0]
traces = {"sigma2": chain.draws["sigma2"], "lambda_1": chain.draws["lam"][:, 0],
          "gamma_2_1": chain.draws["gamma"][:, 0]}
for row in diagnose_traces(traces):
    print(row)
