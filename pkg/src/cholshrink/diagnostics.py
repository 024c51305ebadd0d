"""Convergence diagnostics for single MCMC traces."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import TraceTooShortError

MIN_LENGTH = 100


class GewekeResult(NamedTuple):
    z: float
    zero_variance: bool


def _check(trace) -> np.ndarray:
    x = np.asarray(trace, dtype=float).reshape(-1)
    if x.shape[0] < MIN_LENGTH:
        raise TraceTooShortError(f"trace has {x.shape[0]} draws; need at least {MIN_LENGTH}")
    return x


def spectrum0_batch_means(x: np.ndarray, n_batches: int = 20) -> float:
    """Spectral density at frequency zero from non-overlapping batch means."""
    nb = min(n_batches, x.shape[0])
    size = x.shape[0] // nb
    means = x[: nb * size].reshape(nb, size).mean(axis=1)
    if nb < 2:
        return 0.0
    return float(size * means.var(ddof=1))


def geweke(trace, frac_a: float = 0.1, frac_b: float = 0.5, n_batches: int = 20) -> GewekeResult:
    """Geweke z comparing the first ``frac_a`` and last ``frac_b`` of a trace."""
    x = _check(trace)
    if not (0 < frac_a and 0 < frac_b and frac_a + frac_b <= 1):
        raise ValueError("need 0 < frac_a, frac_b and frac_a + frac_b <= 1")
    n = x.shape[0]
    xa = x[: int(frac_a * n)]
    xb = x[n - int(frac_b * n):]
    var = (spectrum0_batch_means(xa, n_batches) / xa.shape[0]
           + spectrum0_batch_means(xb, n_batches) / xb.shape[0])
    diff = xa.mean() - xb.mean()
    if var <= 0:
        return GewekeResult(0.0, True)
    return GewekeResult(float(diff / np.sqrt(var)), False)


def geweke_z(trace, frac_a: float = 0.1, frac_b: float = 0.5) -> float:
    return geweke(trace, frac_a, frac_b).z


def autocorrelation(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(trace) -> float:
    """``n / (1 + 2 sum_k rho_k)`` with Geyer's initial positive sequence.

    Autocorrelations are summed in adjacent pairs until the first pair whose
    sum is not positive. The result is capped at ``n``; a constant trace
    returns ``n``.
    """
    x = _check(trace)
    n = x.shape[0]
    rho = autocorrelation(x)
    if not np.any(rho):
        return float(n)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(min(n / tau, n)) if tau > 0 else float(n)


def diagnose_traces(traces: dict[str, np.ndarray], z_threshold: float = 3.0) -> list[dict]:
    """Table rows ``parameter, n, ess, geweke_z, zero_variance, flag`` per trace."""
    out = []
    for label, tr in traces.items():
        g = geweke(tr)
        out.append({
            "parameter": label,
            "n": int(np.asarray(tr).shape[0]),
            "ess": effective_sample_size(tr),
            "geweke_z": g.z,
            "zero_variance": g.zero_variance,
            "flag": bool(abs(g.z) > z_threshold),
        })
    return out
