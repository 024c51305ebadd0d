"""Random variate generators for the Gibbs sampler.

Every sampler takes an explicit ``numpy.random.Generator`` so that chains
never share state. Gamma-type laws use the shape/rate convention
(mean ``shape / rate``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from ._linalg import cholesky_lower
from .errors import InvalidParameterError

# lower truncation point (in sd units) above which the exponential proposal is used
_TAIL_SWITCH = 0.45


def rng_stream(seed: int, stream: int | tuple[int, ...] = ()) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``.

    Distinct ``stream`` keys give statistically independent sequences via
    ``SeedSequence`` spawn keys; the same pair always reproduces the same draws.
    """
    if isinstance(stream, int):
        stream = (stream,)
    if seed < 0 or seed >= 2**64:
        raise InvalidParameterError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _positive(name: str, value) -> None:
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")


def draw_normal(rng: np.random.Generator, mean, var):
    """N(mean, var); ``var = 0`` returns ``mean`` exactly. Vectorised over arguments."""
    v = np.asarray(var, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise InvalidParameterError(f"variance must be finite and >= 0, got {var!r}")
    if np.ndim(mean) == 0 and v.ndim == 0:
        if var == 0:
            return float(mean)
        return float(mean + math.sqrt(var) * rng.standard_normal())
    mean, v = np.broadcast_arrays(np.asarray(mean, dtype=float), v)
    return mean + np.sqrt(v) * rng.standard_normal(mean.shape)


def draw_truncated_normal_pos(rng: np.random.Generator, mean, var):
    """Exact draw from N(mean, var) restricted to [0, inf).

    Uses plain normal rejection when the truncation point sits in the bulk and
    Robert's (1995) translated-exponential rejection in the tail, so the
    acceptance rate stays bounded away from zero for any ``mean``. Array
    arguments give one independent draw per element.
    """
    if np.ndim(mean) or np.ndim(var):
        m, v = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(var, dtype=float))
        return np.array([_trunc_pos(rng, float(a), float(b)) for a, b in zip(m.ravel(), v.ravel())]
                        ).reshape(m.shape)
    return _trunc_pos(rng, float(mean), float(var))


def _trunc_pos(rng: np.random.Generator, mean: float, var: float) -> float:
    if not math.isfinite(var) or var <= 0:
        raise InvalidParameterError(f"variance must be finite and > 0, got {var!r}")
    if not math.isfinite(mean):
        raise InvalidParameterError(f"mean must be finite, got {mean!r}")
    sd = math.sqrt(var)
    alpha = -mean / sd
    if alpha < _TAIL_SWITCH:
        while True:
            z = rng.standard_normal()
            if z >= alpha:
                break
    else:
        rate = 0.5 * (alpha + math.sqrt(alpha * alpha + 4.0))
        while True:
            z = alpha + rng.exponential(1.0 / rate)
            if rng.random() <= math.exp(-0.5 * (z - rate) ** 2):
                break
    return max(mean + sd * z, 0.0)


def draw_gamma(rng: np.random.Generator, shape, rate):
    """Gamma(shape, rate) with mean ``shape / rate``; vectorised over arguments."""
    _positive("shape", shape)
    _positive("rate", rate)
    out = rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float))
    # underflow to exactly 0 is possible for tiny shapes; keep the support open
    out = np.maximum(out, np.finfo(float).tiny)
    return float(out) if np.ndim(out) == 0 else out


def draw_inverse_gamma(rng: np.random.Generator, shape, rate):
    """Reciprocal of a Gamma(shape, rate) draw (mean ``rate / (shape - 1)``)."""
    g = draw_gamma(rng, shape, rate)
    return 1.0 / g


def draw_inverse_gaussian(rng: np.random.Generator, mu, lambda_param):
    """Inverse-Gaussian (Wald) draw with mean ``mu`` and shape ``lambda_param``.

    Michael, Schucany and Haas transformation, written without the
    subtraction of nearly equal terms that ``Generator.wald`` performs; that
    form returns draws far too small once ``mu / lambda_param`` is large.
    """
    _positive("mu", mu)
    _positive("lambda_param", lambda_param)
    mu, lam = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(lambda_param, dtype=float))
    y = rng.standard_normal(mu.shape) ** 2
    t = mu * y / (2.0 * lam)
    # mu * (1 + t - sqrt(t^2 + 2t)) == mu / (1 + t + sqrt(t^2 + 2t))
    d = 1.0 + t + np.sqrt(t * (t + 2.0))
    small = mu / d
    big = mu * d                      # mu^2 / small
    u = rng.random(mu.shape)
    out = np.where(u * (1.0 + 1.0 / d) <= 1.0, small, big)   # P(small) = mu / (mu + small)
    out = np.clip(out, np.finfo(float).tiny, np.finfo(float).max)
    return float(out) if out.ndim == 0 else out


def draw_mvn(rng: np.random.Generator, mean, cov, size: int | None = None) -> np.ndarray:
    """``mean + L z`` with ``L`` the lower Cholesky factor of ``cov``.

    An all-zero ``cov`` is the degenerate law and returns ``mean``. A failed
    factorisation raises ``NotPositiveDefiniteError`` with the pivot index.
    ``size`` stacks that many independent draws along a new first axis.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    k = mean.shape[0]
    if cov.shape != (k, k):
        raise InvalidParameterError(f"cov must be {k}x{k}, got {cov.shape}")
    if not np.any(cov):
        return mean.copy() if size is None else np.tile(mean, (size, 1))
    low = cholesky_lower(cov)
    if size is None:
        return mean + low @ rng.standard_normal(k)
    return mean + rng.standard_normal((size, k)) @ low.T


def draw_mvn_precision(rng: np.random.Generator, precision, linear) -> np.ndarray:
    """Draw from N(Q^{-1} b, Q^{-1}) given precision Q and linear term b.

    This is the canonical form every conjugate normal update in the sampler
    produces; it needs one Cholesky factorisation and two triangular solves.
    """
    low = cholesky_lower(precision)
    w = solve_triangular(low, np.asarray(linear, dtype=float), lower=True)
    z = rng.standard_normal(low.shape[0])
    return solve_triangular(low.T, w + z, lower=False)
