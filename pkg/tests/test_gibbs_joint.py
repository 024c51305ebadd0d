"""Whole-sweep checks: successive-conditional simulation, missing subjects, chain driver."""

from dataclasses import replace

import numpy as np
import pytest

from cholshrink import gibbs
from cholshrink.cholesky import unit_lower
from cholshrink.errors import ChainError, ConfigError, NoSamplesError
from cholshrink.gibbs import (Chain, FitConfig, fit, gibbs_sweep, log_likelihood, run_chain,
                              sigma2_conditional, step_a, summarize)
from cholshrink.priors import (BetaPrior, LambdaPrior, MMPrior, MMSpec, NEGPrior, PriorSpec,
                               Sigma2Prior)
from cholshrink.rand_dists import rng_stream

from conftest import make_data, make_state

# proper priors with enough finite moments for the squared statistics' standard errors
PROPER = dict(
    beta=BetaPrior(p0=0.5, g_shape=6.0, g_rate=6.0),
    lam=LambdaPrior(p_zero=0.3, phi_shape=5.0, phi_rate=5.0),
    sigma2=Sigma2Prior(6.0, 5.0),
)
NEG = PriorSpec(gamma=NEGPrior(c0=6.0, d0_shape=3.0, d0_rate=3.0), **PROPER)
MM = PriorSpec(gamma=MMSpec(0.1, 0.09), **PROPER)


def toy_design():
    rng = np.random.default_rng(11)
    n, q = 3, 3
    Z = np.tile(np.eye(q), (n, 1))
    X = rng.standard_normal((n * q, 2))
    subject = np.repeat(np.arange(n), q)
    return make_data(np.zeros(n * q), X=X, Z=Z, subject=subject)


def prior_draw(data, prior, rng, mm=None):
    """Independent draw of every unknown from the prior hierarchy."""
    bp, lp = prior.beta, prior.lam
    sigma2 = 1.0 / rng.gamma(prior.sigma2.shape, 1.0 / prior.sigma2.rate)
    g = rng.gamma(bp.g_shape, 1.0 / bp.g_rate)
    J = rng.random(data.p) < bp.p0
    beta = np.zeros(data.p)
    idx = np.flatnonzero(J)
    if idx.size:
        cov = sigma2 * np.linalg.inv(data.X[:, idx].T @ data.X[:, idx]) / g
        beta[idx] = rng.multivariate_normal(np.zeros(idx.size), cov)
    phi2 = 1.0 / rng.gamma(lp.phi_shape, 1.0 / lp.phi_rate, size=data.q)
    lam = np.abs(rng.standard_normal(data.q)) * np.sqrt(sigma2 * phi2)
    lam[rng.random(data.q) < lp.p_zero] = 0.0
    r = data.q * (data.q - 1) // 2
    kw = {}
    if isinstance(prior.gamma, NEGPrior):
        d0 = rng.gamma(prior.gamma.d0_shape, 1.0 / prior.gamma.d0_rate)
        delta2 = rng.gamma(prior.gamma.c0, 1.0 / d0)
        psi = rng.exponential(2.0 / delta2, size=r)
        gamma = rng.standard_normal(r) * np.sqrt(sigma2 * psi)
        kw = dict(psi=psi, delta2=delta2, d0=d0)
    else:
        gamma = rng.multivariate_normal(mm.mu, mm.psi)
    a = rng.standard_normal((data.n, data.q))
    return gibbs.ChainState(beta=beta, J=J, g=g, p0=bp.p0, lam=lam, phi2=phi2, gamma=gamma,
                            a=a, sigma2=sigma2, **kw)


def draw_y(state, data, rng):
    L = np.diag(state.lam) @ unit_lower(state.gamma, data.q)
    b = state.a @ L.T
    mean = data.X @ state.beta + np.einsum("rk,rk->r", data.Z, b[data.subject])
    return mean + np.sqrt(state.sigma2) * rng.standard_normal(data.N)


def statistics(s):
    return np.concatenate([s.beta, s.beta ** 2, s.lam, s.lam ** 2, s.gamma, s.gamma ** 2,
                           [s.sigma2, s.sigma2 ** 2]])


def batch_se(x, n_batches=50):
    m = x.shape[0] // n_batches
    means = x[: m * n_batches].reshape(n_batches, m, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


@pytest.mark.parametrize("prior", [NEG, MM], ids=["neg", "mm"])
def test_successive_conditional_preserves_prior(prior):
    data = toy_design()
    mm = MMPrior.build(0.1, 0.09, data.q) if prior is MM else None
    rng = rng_stream(2024, 0)
    n_cycles = 5000
    ref = np.array([statistics(prior_draw(data, prior, rng, mm)) for _ in range(50_000)])
    state = prior_draw(data, prior, rng, mm)
    out = []
    for _ in range(n_cycles):
        d = replace(data, y=draw_y(state, data, rng))
        state = gibbs_sweep(state, d, prior, rng, mm)
        out.append(statistics(state))
    out = np.array(out)
    se = np.sqrt(batch_se(out) ** 2 + ref.var(axis=0) / ref.shape[0])
    z = (out.mean(axis=0) - ref.mean(axis=0)) / se
    assert np.all(np.abs(z) < 3.0), np.round(z, 2)


def test_successive_conditional_detects_wrong_lambda_precision(monkeypatch):
    # the "+1" prior precision for lam breaks the joint: the test has power
    data = toy_design()
    prior = NEG
    orig = gibbs.lambda_zero_prob
    monkeypatch.setattr(gibbs, "lambda_zero_prob",
                        lambda prec, lin, pz, pv: orig(prec, lin, pz, 1.0 / (1.0 + 1.0 / pv)))
    rng = rng_stream(2025, 0)
    ref = np.array([statistics(prior_draw(data, prior, rng)) for _ in range(50_000)])
    state = prior_draw(data, prior, rng)
    out = []
    for _ in range(5000):
        d = replace(data, y=draw_y(state, data, rng))
        state = gibbs_sweep(state, d, prior, rng)
        out.append(statistics(state))
    out = np.array(out)
    se = np.sqrt(batch_se(out) ** 2 + ref.var(axis=0) / ref.shape[0])
    z = (out.mean(axis=0) - ref.mean(axis=0)) / se
    assert np.max(np.abs(z)) > 3.0


def test_empty_subject_changes_only_its_latent():
    data = toy_design()
    data = replace(data, y=np.random.default_rng(0).standard_normal(data.N))
    extra = data.with_subjects(["ghost"])
    prior = NEG
    state = prior_draw(data, prior, np.random.default_rng(1))
    a_extra = np.vstack([state.a, [[5.0, -5.0, 5.0]]])
    s_extra = replace(state, a=a_extra)
    assert log_likelihood(state, data) == log_likelihood(s_extra, extra)
    assert sigma2_conditional(state, data, prior) == sigma2_conditional(s_extra, extra, prior)
    draws = np.array([step_a(s_extra, extra, prior, rng_stream(3, i)).a[-1] for i in range(4000)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.06)
    assert np.all(np.abs(draws.std(axis=0) - 1) < 0.04)


# --- chain driver ------------------------------------------------------------


def small_data(seed=0):
    rng = np.random.default_rng(seed)
    n, q = 20, 3
    Z = np.tile(np.eye(q), (n, 1))
    subject = np.repeat(np.arange(n), q)
    a = rng.standard_normal((n, q))
    y = a[subject, np.tile(np.arange(q), n)] + 0.3 * rng.standard_normal(n * q)
    X = rng.standard_normal((n * q, 2))
    return make_data(y + X[:, 0], X=X, Z=Z, subject=subject)


def test_run_chain_deterministic_and_invariants():
    data = small_data()
    cfg = FitConfig(n_iter=300, n_burnin=100, thin=2, seed=5)
    c1 = fit(data, cfg)[0]
    c2 = fit(data, cfg)[0]
    for k in c1.draws:
        assert np.array_equal(c1.draws[k], c2.draws[k])
    assert len(c1) == 100
    assert np.array_equal(c1.kept_iterations, np.arange(102, 301, 2))
    beta, J = c1.draws["beta"], c1.draws["J"]
    assert np.all(beta[~J] == 0.0)
    om = c1.omega()
    lam = c1.draws["lam"]
    for k in range(len(c1)):
        off = lam[k] == 0
        assert np.all(om[k][off] == 0.0) and np.all(om[k][:, off] == 0.0)
        on = ~off
        if on.any():
            np.linalg.cholesky(om[k][np.ix_(on, on)])


def test_chains_use_distinct_streams():
    data = small_data()
    chains = fit(data, FitConfig(n_iter=50, n_burnin=0, n_chains=2, seed=1))
    assert not np.array_equal(chains[0].draws["sigma2"], chains[1].draws["sigma2"])
    assert [c.chain_id for c in chains] == [0, 1]


def test_run_chain_mm_prior():
    data = small_data()
    cfg = FitConfig(n_iter=100, n_burnin=50, prior=PriorSpec(gamma=MMSpec()))
    chain = fit(data, cfg)[0]
    assert chain.gamma_kind == "mm" and "psi" not in chain.draws


def test_run_chain_needs_rows():
    data = make_data([], X=np.zeros((0, 1)), Z=np.zeros((0, 1)), n_subjects=1)
    with pytest.raises(ConfigError):
        run_chain(data, FitConfig(n_iter=10, n_burnin=0), rng_stream(0, 0))


def test_chain_error_reports_iteration(monkeypatch):
    data = small_data()
    calls = {"n": 0}
    orig = gibbs.step_sigma2

    def flaky(state, d, prior, rng):
        calls["n"] += 1
        if calls["n"] == 7:
            raise FloatingPointError("boom")
        return orig(state, d, prior, rng)

    monkeypatch.setattr(gibbs, "step_sigma2", flaky)
    with pytest.raises(ChainError) as err:
        fit(data, FitConfig(n_iter=20, n_burnin=0))
    assert err.value.iteration == 7 and err.value.step == "sigma2"


def test_fit_config_validation():
    with pytest.raises(ConfigError):
        FitConfig(n_iter=10, n_burnin=20)
    with pytest.raises(ConfigError):
        FitConfig(thin=0)
    with pytest.raises(ConfigError):
        FitConfig(mm_regressand="other")
    assert FitConfig(n_iter=100, n_burnin=10, thin=7).n_kept == 12


def make_chain(lam, gamma, beta, J, sigma2):
    K = len(sigma2)
    draws = dict(lam=np.asarray(lam, float), gamma=np.asarray(gamma, float),
                 beta=np.asarray(beta, float), J=np.asarray(J, bool),
                 sigma2=np.asarray(sigma2, float))
    return Chain(draws, np.zeros(K), np.arange(K), q=2, p=1, gamma_kind="neg")


def test_summarize_oracle():
    c = make_chain(lam=[[1.0, 2.0], [1.0, 0.0]], gamma=[[0.5], [0.5]], beta=[[0.0], [2.0]],
                   J=[[False], [True]], sigma2=[1.0, 3.0])
    s = summarize(c)
    # draw 1: L = [[1, 0], [1, 2]] -> omega = [[1, 1], [1, 5]]; draw 2: [[1, 0], [0, 0]]
    np.testing.assert_allclose(s.omega_mean, [[1.0, 0.5], [0.5, 2.5]])
    rho = 0.5 / np.sqrt(1.25)
    np.testing.assert_allclose(s.rho_mean, [[1.0, rho], [rho, 1.0]])
    assert s.sigma2_mean == 2.0 and s.n_samples_used == 2
    np.testing.assert_allclose(s.inclusion_prob, [0.5])
    np.testing.assert_allclose(s.lambda_zero_prob, [0.0, 0.5])
    np.testing.assert_allclose(s.beta_mean, [1.0])


def test_summarize_pools_chains_and_rejects_empty():
    a = make_chain([[1.0, 1.0]], [[0.0]], [[0.0]], [[False]], [1.0])
    b = make_chain([[3.0, 1.0]], [[0.0]], [[0.0]], [[False]], [2.0])
    s = summarize([a, b])
    assert s.omega_mean[0, 0] == 5.0 and s.n_samples_used == 2
    empty = make_chain(np.zeros((0, 2)), np.zeros((0, 1)), np.zeros((0, 1)),
                       np.zeros((0, 1)), [])
    with pytest.raises(NoSamplesError):
        summarize([empty])
    assert set(s.to_dict()) >= {"omega_mean", "rho_ci", "schema_version"}
