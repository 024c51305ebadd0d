"""Gibbs sampler for the Cholesky-parameterised linear mixed model.

Model, for row ``r`` of subject ``i``::

    y_r = x_r' beta + z_r' Lambda Gamma a_i + eps_r,   a_i ~ N(0, I_q),  eps_r ~ N(0, sigma2)

with one latent vector ``a_i`` per subject shared across response types.
Each ``step_*`` function draws one block from its full conditional and
returns a new :class:`ChainState`; inputs are never modified.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_ndtr

from . import rand_dists as rd
from .cholesky import CholeskyFactors, compose, gamma_index, n_gamma, unit_lower
from .data import LongDataset
from .errors import (
    ChainError,
    ConfigError,
    NoSamplesError,
    NotPositiveDefiniteError,
    SingularDesignError,
)
from .priors import MMPrior, MMSpec, NEGPrior, PriorSpec

# (1 + 1/g)^{1/2} per included covariate in the marginal likelihood of J;
# the enumeration oracle in the tests pins this down against (1 + g).
G_FACTOR_BASE = "1+1/g"


@dataclass(frozen=True)
class ChainState:
    beta: np.ndarray
    J: np.ndarray
    g: float
    p0: float
    lam: np.ndarray
    phi2: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    sigma2: float
    psi: np.ndarray | None = None
    delta2: float | None = None
    d0: float | None = None
    iteration: int = 0

    @property
    def factors(self) -> CholeskyFactors:
        return CholeskyFactors(self.lam, self.gamma)

    @property
    def Gamma(self) -> np.ndarray:
        return unit_lower(self.gamma, self.lam.shape[0])


@dataclass(frozen=True)
class FitConfig:
    n_iter: int = 20_000
    n_burnin: int = 10_000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0
    prior: PriorSpec = field(default_factory=PriorSpec)
    # "residual" subtracts sum_l a_l lam_l z_l from the MM gamma-regression response;
    # "fixed_only" uses y - x'beta alone, which leaves that term in. Test-only switch.
    mm_regressand: str = "residual"

    def __post_init__(self):
        if not (self.n_iter >= self.n_burnin >= 0):
            raise ConfigError("need n_iter >= n_burnin >= 0")
        if self.thin < 1 or self.n_chains < 1:
            raise ConfigError("thin and n_chains must be >= 1")
        if self.mm_regressand not in ("residual", "fixed_only"):
            raise ConfigError("mm_regressand must be 'residual' or 'fixed_only'")

    @property
    def gamma_prior_kind(self) -> str:
        return self.prior.gamma_kind

    @property
    def n_kept(self) -> int:
        return (self.n_iter - self.n_burnin) // self.thin


# --- shared pieces ---------------------------------------------------------


def _gamma_a(state: ChainState) -> np.ndarray:
    # row i holds Gamma a_i
    return state.a @ state.Gamma.T


def random_fit(state: ChainState, data: LongDataset) -> np.ndarray:
    """``z_r' Lambda Gamma a_i`` for every row."""
    ga = _gamma_a(state)
    return np.einsum("rk,rk->r", data.Z * state.lam, ga[data.subject])


def fixed_fit(state: ChainState, data: LongDataset) -> np.ndarray:
    return data.X @ state.beta if data.p else np.zeros(data.N)


def log_likelihood(state: ChainState, data: LongDataset) -> float:
    resid = data.y - fixed_fit(state, data) - random_fit(state, data)
    return float(-0.5 * data.N * math.log(2 * math.pi * state.sigma2)
                 - 0.5 * resid @ resid / state.sigma2)


def u_matrix(state: ChainState, data: LongDataset) -> np.ndarray:
    """Rows are the gamma-regression vectors ``u_r`` (``u[(m, l)] = a_l lam_m z_m``)."""
    rows, cols = gamma_index(data.q)
    w = data.Z * state.lam
    return w[:, rows] * state.a[data.subject][:, cols]


def t_matrix(state: ChainState, data: LongDataset) -> np.ndarray:
    """Rows are the lambda-regression vectors ``t_r = z_r * (Gamma a_i)``."""
    return data.Z * _gamma_a(state)[data.subject]


def _collinear_columns(X: np.ndarray, cols: np.ndarray) -> list[int]:
    if X.shape[1] == 0:
        return []
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    null = vt[-1]
    return [int(c) for c in cols[np.abs(null) > 1e-8]]


def _included_quadratic(state: ChainState, data: LongDataset) -> float:
    idx = np.flatnonzero(state.J)
    if idx.size == 0:
        return 0.0
    b = state.beta[idx]
    return float(b @ data.XtX[np.ix_(idx, idx)] @ b)


# --- steps -----------------------------------------------------------------


def step_beta(state: ChainState, data: LongDataset, prior: PriorSpec,
              rng: np.random.Generator) -> ChainState:
    """Fixed effects given ``J``: ``N(mu, Sigma)``, ``Sigma = (X_J'X_J / sigma2)^{-1} / (g + 1)``."""
    if data.N < 1:
        raise ConfigError("step_beta needs at least one observation")
    beta = np.zeros(data.p)
    idx = np.flatnonzero(state.J)
    if idx.size:
        XJ = data.X[:, idx]
        phi = data.y - random_fit(state, data)
        info = data.XtX[np.ix_(idx, idx)] / state.sigma2
        try:
            beta[idx] = rd.draw_mvn_precision(rng, (1.0 + state.g) * info,
                                              XJ.T @ phi / state.sigma2)
        except NotPositiveDefiniteError:
            raise SingularDesignError("fixed-effect information matrix is singular",
                                      _collinear_columns(XJ, idx)) from None
    return replace(state, beta=beta)


def step_g(state: ChainState, data: LongDataset, prior: PriorSpec,
           rng: np.random.Generator) -> ChainState:
    pj = int(np.count_nonzero(state.J))
    shape = prior.beta.g_shape + 0.5 * pj
    rate = prior.beta.g_rate_for(data.N) + 0.5 * _included_quadratic(state, data) / state.sigma2
    return replace(state, g=rd.draw_gamma(rng, shape, rate))


def _resid_ss(phi_phi: float, xtphi: np.ndarray, XtX: np.ndarray, idx: np.ndarray,
              g: float) -> float:
    if idx.size == 0:
        return phi_phi
    b = xtphi[idx]
    try:
        sol = np.linalg.solve(XtX[np.ix_(idx, idx)], b)
    except np.linalg.LinAlgError:
        raise SingularDesignError("X_J'X_J is singular", idx) from None
    s = phi_phi - (b @ sol) / (1.0 + g)
    floor = np.finfo(float).eps * phi_phi
    if s <= floor:
        warnings.warn("S(J) <= 0 numerically; clamped", RuntimeWarning, stacklevel=3)
        s = floor
    return float(s)


def inclusion_log_odds_against(s_in: float, s_out: float, g: float, p0: float,
                               sigma2: float) -> float:
    """``log h_l``: log odds of excluding covariate ``l`` given the others.

    ``beta`` is integrated out under the g-prior with ``sigma2`` held fixed.
    """
    base = 1.0 + 1.0 / g if G_FACTOR_BASE == "1+1/g" else 1.0 + g
    return (math.log1p(-p0) - math.log(p0) + 0.5 * math.log(base)
            + (s_in - s_out) / (2.0 * sigma2))


def step_J(state: ChainState, data: LongDataset, prior: PriorSpec,
           rng: np.random.Generator) -> ChainState:
    """One sweep over the inclusion indicators, then a fresh ``beta`` for the new ``J``."""
    J = state.J.copy()
    p0 = state.p0
    if data.p:
        phi = data.y - random_fit(state, data)
        phi_phi = float(phi @ phi)
        xtphi = data.X.T @ phi
        for l in range(data.p):
            if p0 >= 1.0:
                J[l] = True
                continue
            if p0 <= 0.0:
                J[l] = False
                continue
            J[l] = True
            s_in = _resid_ss(phi_phi, xtphi, data.XtX, np.flatnonzero(J), state.g)
            J[l] = False
            s_out = _resid_ss(phi_phi, xtphi, data.XtX, np.flatnonzero(J), state.g)
            log_h = inclusion_log_odds_against(s_in, s_out, state.g, p0, state.sigma2)
            J[l] = rng.random() < expit(-log_h)
    if prior.beta.update_p0:
        k = int(J.sum())
        p0 = float(rng.beta(prior.beta.a_p + k, prior.beta.b_p + data.p - k))
    new = replace(state, J=J, p0=p0)
    return step_beta(new, data, prior, rng)


def lambda_zero_prob(prec_data: float, lin: float, p_zero: float, prior_var: float) -> tuple[float, float, float]:
    """Conditional ``P(lam_l = 0)`` and the slab's ``(mean, var)``.

    ``prec_data = sum t^2 / sigma2``, ``lin = sum t e / sigma2`` and the slab
    prior is ``N+(0, prior_var)``.
    """
    tau = 1.0 / prior_var
    var = 1.0 / (prec_data + tau)
    mean = var * lin
    sd = math.sqrt(var)
    if p_zero >= 1.0:
        return 1.0, mean, var
    if p_zero <= 0.0:
        return 0.0, mean, var
    log_slab = (math.log1p(-p_zero) - math.log(p_zero) + math.log(2.0)
                + 0.5 * math.log(tau * var) + 0.5 * mean * mean / var
                + float(log_ndtr(mean / sd)))
    return float(expit(-log_slab)), mean, var


def step_lambda(state: ChainState, data: LongDataset, prior: PriorSpec,
                rng: np.random.Generator) -> ChainState:
    """Coordinate-wise zero-inflated half-normal updates of ``lam``."""
    lam = state.lam.copy()
    T = t_matrix(state, data)
    zeta = data.y - fixed_fit(state, data)
    resid = zeta - T @ lam
    s2 = state.sigma2
    p_zero = prior.lam.p_zero
    for l in range(lam.shape[0]):
        tl = T[:, l]
        resid += tl * lam[l]
        pz, mean, var = lambda_zero_prob(float(tl @ tl) / s2, float(tl @ resid) / s2,
                                         p_zero, s2 * state.phi2[l])
        if rng.random() < pz:
            lam[l] = 0.0
        else:
            lam[l] = rd.draw_truncated_normal_pos(rng, mean, var)
        resid -= tl * lam[l]
    return replace(state, lam=lam)


def step_phi2(state: ChainState, prior: PriorSpec, rng: np.random.Generator) -> ChainState:
    on = state.lam > 0
    shape = prior.lam.phi_shape + 0.5 * on
    rate = prior.lam.phi_rate + np.where(on, 0.5 * state.lam ** 2 / state.sigma2, 0.0)
    return replace(state, phi2=np.atleast_1d(rd.draw_inverse_gamma(rng, shape, rate)))


def _gamma_regression(state: ChainState, data: LongDataset, subtract_diag: bool = True):
    U = u_matrix(state, data)
    w = data.y - fixed_fit(state, data)
    if subtract_diag:
        w = w - np.einsum("rk,rk->r", data.Z * state.lam, state.a[data.subject])
    return U, w


def step_gamma_neg(state: ChainState, data: LongDataset, prior: PriorSpec,
                   rng: np.random.Generator) -> ChainState:
    """Blocked update of ``gamma``, its scales ``psi``, ``delta2`` and ``d0``."""
    neg: NEGPrior = prior.gamma
    s2 = state.sigma2
    r = state.gamma.shape[0]
    if r == 0:
        return state
    U, w = _gamma_regression(state, data)
    prec = (U.T @ U + np.diag(1.0 / state.psi)) / s2
    gamma = rd.draw_mvn_precision(rng, prec, U.T @ w / s2)
    g2 = np.maximum(gamma ** 2, 1e-300)
    inv_psi = rd.draw_inverse_gaussian(rng, np.sqrt(state.delta2 * s2 / g2), state.delta2)
    psi = 1.0 / np.atleast_1d(inv_psi)
    delta2 = rd.draw_gamma(rng, neg.c0 + r, state.d0 + 0.5 * psi.sum())
    d0 = rd.draw_gamma(rng, neg.d0_shape + neg.c0, neg.d0_rate + delta2)
    return replace(state, gamma=gamma, psi=psi, delta2=delta2, d0=d0)


def step_gamma_mm(state: ChainState, data: LongDataset, mm: MMPrior,
                  rng: np.random.Generator, regressand: str = "residual") -> ChainState:
    if state.gamma.shape[0] == 0:
        return state
    U, w = _gamma_regression(state, data, subtract_diag=(regressand == "residual"))
    s2 = state.sigma2
    prec = U.T @ U / s2 + mm.precision
    gamma = rd.draw_mvn_precision(rng, prec, U.T @ w / s2 + mm.precision @ mm.mu)
    return replace(state, gamma=gamma)


def step_a(state: ChainState, data: LongDataset, prior: PriorSpec,
           rng: np.random.Generator) -> ChainState:
    """Per-subject latent vectors; subjects without rows get prior draws."""
    q = data.q
    n = data.n
    V = (data.Z * state.lam) @ state.Gamma
    zeta = data.y - fixed_fit(state, data)
    s2 = state.sigma2
    prec = np.broadcast_to(np.eye(q), (n, q, q)).copy()
    lin = np.zeros((n, q))
    subj, starts = data.segments
    if subj.size:
        prec[subj] += np.add.reduceat(V[:, :, None] * V[:, None, :], starts, axis=0) / s2
        lin[subj] = np.add.reduceat(V * zeta[:, None], starts, axis=0) / s2
    low = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, lin[..., None])[..., 0]
    z = rng.standard_normal((n, q, 1))
    noise = np.linalg.solve(np.swapaxes(low, 1, 2), z)[..., 0]
    return replace(state, a=mean + noise)


def sigma2_conditional(state: ChainState, data: LongDataset, prior: PriorSpec) -> tuple[float, float]:
    """Shape and rate of the inverse-gamma full conditional of ``sigma2``.

    Besides the residuals, ``sigma2`` scales the g-prior slab, the half-normal
    slab of every non-zero ``lam`` and (NEG only) the normal prior of ``gamma``.
    """
    resid = data.y - fixed_fit(state, data) - random_fit(state, data)
    on = state.lam > 0
    shape = prior.sigma2.shape + 0.5 * data.N
    rate = prior.sigma2.rate + 0.5 * float(resid @ resid)
    shape += 0.5 * int(np.count_nonzero(state.J))
    rate += 0.5 * state.g * _included_quadratic(state, data)
    shape += 0.5 * int(on.sum())
    rate += 0.5 * float(np.sum(state.lam[on] ** 2 / state.phi2[on]))
    if isinstance(prior.gamma, NEGPrior) and state.gamma.size:
        shape += 0.5 * state.gamma.shape[0]
        rate += 0.5 * float(np.sum(state.gamma ** 2 / state.psi))
    return shape, rate


def step_sigma2(state: ChainState, data: LongDataset, prior: PriorSpec,
                rng: np.random.Generator) -> ChainState:
    if data.N < 1:
        raise ConfigError("step_sigma2 needs at least one observation")
    shape, rate = sigma2_conditional(state, data, prior)
    if not rate > 0:
        warnings.warn("all residuals are exactly zero; adding 1e-30 to the rate",
                      RuntimeWarning, stacklevel=2)
        rate += 1e-30
    return replace(state, sigma2=rd.draw_inverse_gamma(rng, shape, rate))


# --- driving ---------------------------------------------------------------


def initial_state(data: LongDataset, prior: PriorSpec) -> ChainState:
    sd = float(np.std(data.y)) if data.N > 1 else 1.0
    var = sd * sd
    r = n_gamma(data.q)
    neg = isinstance(prior.gamma, NEGPrior)
    return ChainState(
        beta=np.zeros(data.p),
        J=np.ones(data.p, dtype=bool),
        g=1.0,
        p0=prior.beta.p0,
        lam=np.full(data.q, sd if sd > 0 else 1.0),
        phi2=np.ones(data.q),
        gamma=np.zeros(r),
        a=np.zeros((data.n, data.q)),
        sigma2=var if var > 0 else 1.0,
        psi=np.ones(r) if neg else None,
        delta2=1.0 if neg else None,
        d0=1.0 if neg else None,
    )


def gibbs_sweep(state: ChainState, data: LongDataset, prior: PriorSpec,
                rng: np.random.Generator, mm: MMPrior | None = None,
                mm_regressand: str = "residual") -> ChainState:
    """One full iteration in the order beta, g, J, lam (+phi2), gamma, a, sigma2."""
    steps = [
        ("beta", lambda s: step_beta(s, data, prior, rng)),
        ("g", lambda s: step_g(s, data, prior, rng)),
        ("J", lambda s: step_J(s, data, prior, rng)),
        ("lambda", lambda s: step_lambda(s, data, prior, rng)),
        ("phi2", lambda s: step_phi2(s, prior, rng)),
    ]
    if isinstance(prior.gamma, MMSpec):
        steps.append(("gamma", lambda s: step_gamma_mm(s, data, mm, rng, mm_regressand)))
    else:
        steps.append(("gamma", lambda s: step_gamma_neg(s, data, prior, rng)))
    steps += [
        ("a", lambda s: step_a(s, data, prior, rng)),
        ("sigma2", lambda s: step_sigma2(s, data, prior, rng)),
    ]
    it = state.iteration + 1
    for name, fn in steps:
        try:
            state = fn(state)
        except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            raise ChainError(it, name, exc) from exc
    return replace(state, iteration=it)


SCALAR_FIELDS = ("g", "p0", "sigma2", "delta2", "d0")
VECTOR_FIELDS = ("beta", "J", "lam", "phi2", "gamma", "psi")


@dataclass
class Chain:
    """Kept draws of one chain, stored field by field (first axis = draw)."""

    draws: dict[str, np.ndarray]
    loglik: np.ndarray
    kept_iterations: np.ndarray
    q: int
    p: int
    gamma_kind: str
    chain_id: int = 0
    final_state: ChainState | None = None

    def __len__(self) -> int:
        return self.kept_iterations.shape[0]

    def omega(self) -> np.ndarray:
        """Covariance matrix of every kept draw, shape (K, q, q)."""
        return batch_compose(self.draws["lam"], self.draws["gamma"], self.q)

    def rho(self) -> np.ndarray:
        return batch_corr(self.draws["gamma"], self.q)


def batch_compose(lam: np.ndarray, gamma: np.ndarray, q: int) -> np.ndarray:
    K = lam.shape[0]
    G = np.broadcast_to(np.eye(q), (K, q, q)).copy()
    rows, cols = gamma_index(q)
    G[:, rows, cols] = gamma
    L = lam[:, :, None] * G
    om = L @ np.swapaxes(L, 1, 2)
    return 0.5 * (om + np.swapaxes(om, 1, 2))


def batch_corr(gamma: np.ndarray, q: int) -> np.ndarray:
    K = gamma.shape[0]
    G = np.broadcast_to(np.eye(q), (K, q, q)).copy()
    rows, cols = gamma_index(q)
    G[:, rows, cols] = gamma
    C = G @ np.swapaxes(G, 1, 2)
    s = 1.0 / np.sqrt(np.einsum("kii->ki", C))
    rho = C * s[:, :, None] * s[:, None, :]
    rho = 0.5 * (rho + np.swapaxes(rho, 1, 2))
    idx = np.arange(q)
    rho[:, idx, idx] = 1.0
    return np.clip(rho, -1.0, 1.0)


def run_chain(data: LongDataset, config: FitConfig, rng: np.random.Generator,
              chain_id: int = 0, mm: MMPrior | None = None) -> Chain:
    """Run one chain and keep every ``thin``-th draw after burn-in."""
    prior = config.prior
    if data.N < 1:
        raise ConfigError("cannot run a chain without observations")
    if isinstance(prior.gamma, MMSpec) and mm is None:
        mm = MMPrior.build(prior.gamma.u, prior.gamma.v, data.q)
    state = initial_state(data, prior)
    K = config.n_kept
    store: dict[str, np.ndarray] = {}
    for name in SCALAR_FIELDS:
        if getattr(state, name) is not None:
            store[name] = np.empty(K)
    for name in VECTOR_FIELDS:
        v = getattr(state, name)
        if v is not None:
            store[name] = np.empty((K, v.shape[0]), dtype=v.dtype)
    loglik = np.empty(config.n_iter)
    kept = np.empty(K, dtype=np.int64)
    k = 0
    for it in range(1, config.n_iter + 1):
        state = gibbs_sweep(state, data, prior, rng, mm, config.mm_regressand)
        loglik[it - 1] = log_likelihood(state, data)
        if it > config.n_burnin and (it - config.n_burnin) % config.thin == 0 and k < K:
            for name, arr in store.items():
                arr[k] = getattr(state, name)
            kept[k] = it
            k += 1
    return Chain(store, loglik, kept, data.q, data.p, prior.gamma_kind, chain_id, state)


def fit(data: LongDataset, config: FitConfig) -> list[Chain]:
    """Run ``config.n_chains`` chains on disjoint random streams."""
    mm = None
    if isinstance(config.prior.gamma, MMSpec):
        mm = MMPrior.build(config.prior.gamma.u, config.prior.gamma.v, data.q)
    return [run_chain(data, config, rd.rng_stream(config.seed, c), chain_id=c, mm=mm)
            for c in range(config.n_chains)]


@dataclass
class PosteriorSummary:
    omega_mean: np.ndarray
    omega_ci: tuple[np.ndarray, np.ndarray]
    rho_mean: np.ndarray
    rho_ci: tuple[np.ndarray, np.ndarray]
    beta_mean: np.ndarray
    beta_ci: tuple[np.ndarray, np.ndarray]
    inclusion_prob: np.ndarray
    lambda_zero_prob: np.ndarray
    sigma2_mean: float
    n_samples_used: int

    def to_dict(self) -> dict:
        def mat(x):
            return np.asarray(x).tolist()

        return {
            "schema_version": 1,
            "n_samples_used": self.n_samples_used,
            "sigma2_mean": float(self.sigma2_mean),
            "beta_mean": mat(self.beta_mean),
            "beta_ci": [mat(self.beta_ci[0]), mat(self.beta_ci[1])],
            "inclusion_prob": mat(self.inclusion_prob),
            "lambda_zero_prob": mat(self.lambda_zero_prob),
            "omega_mean": mat(self.omega_mean),
            "omega_ci": [mat(self.omega_ci[0]), mat(self.omega_ci[1])],
            "rho_mean": mat(self.rho_mean),
            "rho_ci": [mat(self.rho_ci[0]), mat(self.rho_ci[1])],
        }


def _ci(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = np.quantile(x, [0.025, 0.975], axis=0)
    return lo, hi


def summarize(chains) -> PosteriorSummary:
    """Pool the kept draws of all chains into posterior means and 95% intervals."""
    if isinstance(chains, Chain):
        chains = [chains]
    chains = [c for c in chains if len(c)]
    if not chains:
        raise NoSamplesError("no kept draws to summarise")
    cat = {name: np.concatenate([c.draws[name] for c in chains])
           for name in chains[0].draws}
    q = chains[0].q
    omega = batch_compose(cat["lam"], cat["gamma"], q)
    rho = batch_corr(cat["gamma"], q)
    return PosteriorSummary(
        omega_mean=omega.mean(axis=0),
        omega_ci=_ci(omega),
        rho_mean=rho.mean(axis=0),
        rho_ci=_ci(rho),
        beta_mean=cat["beta"].mean(axis=0),
        beta_ci=_ci(cat["beta"]),
        inclusion_prob=cat["J"].mean(axis=0),
        lambda_zero_prob=(cat["lam"] == 0).mean(axis=0),
        sigma2_mean=float(cat["sigma2"].mean()),
        n_samples_used=int(cat["sigma2"].shape[0]),
    )


def omega_of(state: ChainState) -> np.ndarray:
    return compose(state.factors)
