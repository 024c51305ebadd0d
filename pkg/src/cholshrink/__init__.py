"""Bayesian covariance selection for multivariate longitudinal mixed models.

The random-effects covariance is parameterized as ``Omega = Lambda Gamma Gamma' Lambda``
with zero-inflated half-normal scales and either normal-exponential-gamma
shrinkage or moment-matching priors on the unit lower triangular ``Gamma``.
"""

from .cholesky import (CholeskyFactors, build_t_vector, build_u_vector, compose,
                       corr_from_gamma, corr_matrix, decompose)
from .data import LongDataset, load_csv, write_csv
from .diagnostics import effective_sample_size, geweke, geweke_z
from .errors import (ChainError, ConfigError, DataError, InfeasibleTargetError,
                     NotPositiveDefiniteError, NumericError, SchemaError)
from .gibbs import Chain, ChainState, FitConfig, PosteriorSummary, fit, run_chain, summarize
from .priors import (BetaPrior, LambdaPrior, MMPrior, MMSpec, NEGPrior, PriorSpec,
                     Sigma2Prior)
from .rand_dists import rng_stream
from .simulation import StructureKind, make_structure, sel_loss, simulate_dataset

__version__ = "0.1.0"
