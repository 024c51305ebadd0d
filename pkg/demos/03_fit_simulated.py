"""
Fitting the sampler to simulated data
=====================================

Simulate 80 subjects with an AR(1)-like covariance over five visits, fit the
Gibbs sampler with the shrinkage prior, and compare the posterior mean
covariance with the truth.
"""

import numpy as np

from cholshrink import FitConfig, PriorSpec, NEGPrior, fit, make_structure, sel_loss
from cholshrink import simulate_dataset, summarize, rng_stream

q = 5
truth = make_structure("full", q)
data = simulate_dataset(truth, n_subjects=80, n_visits=q, n_responses=1, sigma2=0.05,
                        rng=rng_stream(1, 0))
print(f"{data.n} subjects, {data.N} observations, q={data.q}")

config = FitConfig(n_iter=4000, n_burnin=2000, seed=3, prior=PriorSpec(gamma=NEGPrior()))
chains = fit(data, config)
post = summarize(chains)

np.set_printoptions(precision=2, suppress=True)
print("true Omega:\n", truth)
print("posterior mean Omega:\n", post.omega_mean)
print("posterior mean correlations:\n", post.rho_mean)
print("P(lam_l = 0):", post.lambda_zero_prob)
print("squared error loss:", round(sel_loss(post.omega_mean, truth), 4))
