import numpy as np
import pytest
from scipy import stats

from cholshrink import rand_dists as rd
from cholshrink.errors import InvalidParameterError, NotPositiveDefiniteError

N = 100_000


def test_same_seed_same_stream():
    a = rd.rng_stream(7, 3).standard_normal(5)
    b = rd.rng_stream(7, 3).standard_normal(5)
    c = rd.rng_stream(7, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_distinct_streams_uncorrelated():
    a = rd.rng_stream(1, 0).standard_normal(N)
    b = rd.rng_stream(1, 1).standard_normal(N)
    assert abs(np.corrcoef(a, b)[0, 1]) < 5 / np.sqrt(N)


def test_normal(rng):
    assert rd.draw_normal(rng, 3.0, 0.0) == 3.0
    x = rd.draw_normal(rng, np.zeros(N), 1.0)
    assert abs(x.mean()) < 0.02
    x = rd.draw_normal(rng, np.zeros(N), 4.0)
    assert abs(x.var() - 4) < 0.15
    for bad in (-1.0, np.inf, np.nan):
        with pytest.raises(InvalidParameterError):
            rd.draw_normal(rng, 0.0, bad)


def test_truncated_normal_half_normal_mean(rng):
    x = rd.draw_truncated_normal_pos(rng, np.zeros(N), 1.0)
    assert np.all(x >= 0)
    assert abs(x.mean() - np.sqrt(2 / np.pi)) < 0.01


def test_truncated_normal_far_from_boundary(rng):
    x = rd.draw_truncated_normal_pos(rng, np.full(N, 5.0), 1e-6)
    assert abs(x.mean() - 5) < 1e-4


@pytest.mark.parametrize("mean", [-8.0, -2.0, -0.3, 0.7, 3.0])
def test_truncated_normal_matches_scipy(rng, mean):
    # exact (not clipped) even deep in the tail
    x = rd.draw_truncated_normal_pos(rng, np.full(20_000, mean), 1.0)
    assert np.all(x >= 0)
    ref = stats.truncnorm(-mean, np.inf, loc=mean, scale=1.0)
    assert stats.kstest(x, ref.cdf).statistic < 0.015


def test_truncated_normal_errors(rng):
    with pytest.raises(InvalidParameterError):
        rd.draw_truncated_normal_pos(rng, 0.0, 0.0)


def test_gamma(rng):
    x = rd.draw_gamma(rng, np.full(N, 2.0), 4.0)
    assert np.all(x > 0)
    assert abs(x.mean() - 0.5) < 0.02
    assert abs(x.var() - 0.125) < 0.01
    with pytest.raises(InvalidParameterError):
        rd.draw_gamma(rng, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        rd.draw_gamma(rng, 1.0, -1.0)


def test_inverse_gamma(rng):
    x = rd.draw_inverse_gamma(rng, np.full(N, 3.0), 2.0)
    assert np.all(x > 0)
    assert abs(x.mean() - 1.0) < 0.03
    # reciprocal oracle: 1/x ~ Gamma(3, rate 2)
    assert stats.kstest(1 / x, stats.gamma(3.0, scale=0.5).cdf).statistic < 0.01
    with pytest.raises(InvalidParameterError):
        rd.draw_inverse_gamma(rng, 1.0, 0.0)


def test_inverse_gaussian(rng):
    x = rd.draw_inverse_gaussian(rng, np.full(N, 2.0), 5.0)
    assert np.all(x > 0)
    assert abs(x.mean() - 2) < 0.03
    assert abs(x.var() - 1.6) < 0.1
    with pytest.raises(InvalidParameterError):
        rd.draw_inverse_gaussian(rng, 0.0, 1.0)


@pytest.mark.parametrize("mu,lam", [(2.0, 5.0), (1e4, 1.0), (3.0, 1e-8), (1e-6, 1e3)])
def test_inverse_gaussian_matches_cdf(rng, mu, lam):
    # includes mean/shape ratios where the textbook root loses every digit
    x = rd.draw_inverse_gaussian(rng, np.full(20_000, mu), lam)
    assert stats.kstest(x, stats.invgauss(mu / lam, scale=lam).cdf).statistic < 0.015


def test_mvn(rng):
    assert np.array_equal(rd.draw_mvn(rng, [1.0, 2.0], np.zeros((2, 2))), [1.0, 2.0])
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    x = rd.draw_mvn(rng, [1.0, -1.0], cov, size=N)
    assert np.all(np.abs(np.cov(x.T) - cov) < 0.05)
    assert np.all(np.abs(x.mean(axis=0) - [1, -1]) < 0.02)


def test_mvn_not_pd_reports_pivot(rng):
    with pytest.raises(NotPositiveDefiniteError) as err:
        rd.draw_mvn(rng, np.zeros(3), np.array([[1.0, 0, 0], [0, 1.0, 1.0], [0, 1.0, 1.0]]))
    assert err.value.pivot == 2


def test_mvn_precision_moments(rng):
    Q = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -2.0])
    x = np.array([rd.draw_mvn_precision(rng, Q, b) for _ in range(20_000)])
    cov = np.linalg.inv(Q)
    assert np.allclose(x.mean(axis=0), cov @ b, atol=0.02)
    assert np.allclose(np.cov(x.T), cov, atol=0.02)
