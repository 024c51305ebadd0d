"""True covariance structures and synthetic longitudinal datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import cholesky_lower
from .data import LongDataset, indicator_design
from .errors import ConfigError, NotPositiveDefiniteError

STRUCTURES = ("identity", "tridiagonal", "circulant", "block_diagonal", "random", "full")


@dataclass(frozen=True)
class StructureKind:
    kind: str
    q: int
    decay: float = 0.8
    tridiag_value: float = -0.488
    corner: float = 0.4
    n_blocks: int = 6
    random_offdiag: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRUCTURES:
            raise ConfigError(f"unknown structure {self.kind!r}; choose from {STRUCTURES}")
        if self.q < 2:
            raise ConfigError("q must be >= 2")


def _ar_decay(size: int, decay: float) -> np.ndarray:
    k = np.arange(size)
    return decay ** np.abs(k[:, None] - k[None, :])


def _banded(q: int, value: float) -> np.ndarray:
    m = np.eye(q)
    i = np.arange(q - 1)
    m[i, i + 1] = m[i + 1, i] = value
    return m


def block_sizes(q: int, n_blocks: int) -> list[int]:
    """Equal blocks, the last absorbing any remainder.

    When ``q`` is too small for ``n_blocks`` blocks of at least two variables,
    the number of blocks drops to ``q // 2``.
    """
    nb = max(1, min(n_blocks, q // 2))
    size = q // nb
    sizes = [size] * nb
    sizes[-1] += q - size * nb
    return sizes


def _psd_repair(m: np.ndarray, floor: float = 1e-4) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w.min() >= floor:
        return m
    w = np.clip(w, floor, None)
    fixed = (v * w) @ v.T
    s = 1.0 / np.sqrt(np.diag(fixed))
    fixed = fixed * s[:, None] * s[None, :]
    return 0.5 * (fixed + fixed.T)


def make_structure(kind: StructureKind | str, q: int | None = None, **params) -> np.ndarray:
    """One of the six benchmark covariance matrices (unit diagonal)."""
    if isinstance(kind, str):
        kind = StructureKind(kind, q, **params)
    q = kind.q
    if kind.kind == "identity":
        om = np.eye(q)
    elif kind.kind == "tridiagonal":
        om = _banded(q, kind.tridiag_value)
    elif kind.kind == "circulant":
        om = _banded(q, kind.tridiag_value)
        om[0, q - 1] = om[q - 1, 0] = kind.corner
    elif kind.kind == "block_diagonal":
        om = np.zeros((q, q))
        start = 0
        for size in block_sizes(q, kind.n_blocks):
            om[start:start + size, start:start + size] = _ar_decay(size, kind.decay)
            start += size
    elif kind.kind == "full":
        om = _ar_decay(q, kind.decay)
    else:
        om = _random_structure(kind)
    w = np.linalg.eigvalsh(om)
    if w.min() < -1e-10:
        raise ConfigError(
            f"{kind.kind} structure with q={q} is not positive semi-definite "
            f"(min eigenvalue {w.min():.3g})"
        )
    return om


def _random_structure(kind: StructureKind) -> np.ndarray:
    """Banded 0.4 structure plus ``q // 2`` random entries far from the diagonal.

    Extra pairs sit at lag ``|m - l| >= 3`` with values uniform on
    ``+/-[0.3, 0.6]``; the result is pushed back to a positive definite
    correlation matrix by eigenvalue flooring and rescaling.
    """
    q = kind.q
    rng = np.random.default_rng(kind.seed)
    om = _banded(q, kind.random_offdiag)
    far = [(m, l) for m in range(q) for l in range(m) if m - l >= 3]
    k = min(q // 2, len(far))
    if k:
        pick = rng.choice(len(far), size=k, replace=False)
        vals = rng.uniform(0.3, 0.6, size=k) * rng.choice([-1.0, 1.0], size=k)
        for (m, l), val in zip((far[i] for i in pick), vals):
            om[m, l] = om[l, m] = val
    return _psd_repair(om)


def simulate_dataset(omega, n_subjects: int, n_visits: int, n_responses: int,
                     sigma2: float, rng: np.random.Generator, return_latent: bool = False):
    """Draw ``b_i ~ N(0, omega)`` per subject and observe every component once.

    Row ``(h, j)`` of subject ``i`` has ``z`` equal to the unit vector at
    ``(h - 1) * n_visits + (j - 1)``, no fixed effects, and
    ``y = b_i[that index] + N(0, sigma2)``. For SPD ``omega`` the draw is
    ``b_i = L a_i`` with ``L`` the lower Cholesky factor, i.e.
    ``Lambda Gamma a_i`` for the modified Cholesky factors.
    """
    omega = np.asarray(omega, dtype=float)
    q = n_visits * n_responses
    if omega.shape != (q, q):
        raise ConfigError(f"omega must be {q}x{q} for {n_visits} visits x {n_responses} responses")
    if n_subjects < 0 or sigma2 < 0:
        raise ConfigError("n_subjects and sigma2 must be >= 0")
    try:
        root = cholesky_lower(omega)
    except NotPositiveDefiniteError:
        w, v = np.linalg.eigh(omega)
        if w.min() < -1e-10:
            raise ConfigError("omega is not positive semi-definite") from None
        root = v * np.sqrt(np.clip(w, 0.0, None))
    a = rng.standard_normal((n_subjects, q))
    b = a @ root.T
    h, j = np.meshgrid(np.arange(1, n_responses + 1), np.arange(1, n_visits + 1), indexing="ij")
    h = np.tile(h.ravel(), n_subjects)
    j = np.tile(j.ravel(), n_subjects)
    subj = np.repeat(np.arange(n_subjects), q)
    y = b.ravel()
    if sigma2 > 0:
        y = y + np.sqrt(sigma2) * rng.standard_normal(y.shape[0])
    width = max(3, len(str(n_subjects)))
    ids = tuple(f"s{i + 1:0{width}d}" for i in range(n_subjects))
    data = LongDataset(ids, subj, h, j, y, np.zeros((y.shape[0], 0)),
                       indicator_design(h, j, n_responses, n_visits))
    return (data, a) if return_latent else data


def sel_loss(est, truth) -> float:
    """``sqrt(sum (est - truth)^2) / q^2``."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.ndim != 2 or est.shape[0] != est.shape[1]:
        raise ConfigError(f"shape mismatch: {est.shape} vs {truth.shape}")
    q = est.shape[0]
    return float(np.sqrt(np.sum((est - truth) ** 2)) / q ** 2)
