"""
Covariance matrices from scale and direction factors
=====================================================

A covariance matrix is written as Lambda Gamma Gamma' Lambda: nonnegative
scales on the diagonal of Lambda and a unit lower triangular Gamma. A zero
scale removes a random effect entirely, and the correlations depend on Gamma
alone.
"""

import numpy as np

from cholshrink import CholeskyFactors, compose, corr_from_gamma, decompose
from cholshrink.cholesky import gamma_rows

rng = np.random.default_rng(0)

# four random effects; gamma is stored row by row below the diagonal
lam = np.array([1.0, 0.5, 2.0, 0.8])
gamma = rng.standard_normal(6)
omega = compose(CholeskyFactors(lam, gamma))
print("Omega:\n", np.round(omega, 3))

# going back recovers the factors
back = decompose(omega)
print("recovered lam:", back.lam)
print("max gamma error:", np.max(np.abs(back.gamma - gamma)))

# correlations need only two rows of Gamma, not the scales
rows = gamma_rows(gamma, 4)
rho_31 = corr_from_gamma(rows[2], rows[0])
d = np.sqrt(np.diag(omega))
print("rho(3, 1) from gamma:", rho_31, " from Omega:", omega[2, 0] / (d[2] * d[0]))

# a zero scale zeroes the whole row and column
lam0 = lam.copy()
lam0[1] = 0.0
print("Omega with lam_2 = 0:\n", np.round(compose(CholeskyFactors(lam0, gamma)), 3))
