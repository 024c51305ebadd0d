"""Modified Cholesky parameterisation of a random-effects covariance.

``Omega = Lambda Gamma Gamma' Lambda`` with ``Lambda = diag(lam)``, ``lam >= 0``,
and ``Gamma`` unit lower triangular. The strictly lower entries of ``Gamma``
are stored row by row: ``(g21, g31, g32, g41, ...)``, which is the order
``numpy.tril_indices(q, -1)`` produces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._linalg import cholesky_lower
from .errors import InvalidParameterError


def n_gamma(q: int) -> int:
    return q * (q - 1) // 2


@lru_cache(maxsize=64)
def gamma_index(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column (0-based) of each stored gamma entry."""
    rows, cols = np.tril_indices(q, -1)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


def gamma_position(m: int, l: int) -> int:
    """Position of the 0-based entry ``(m, l)``, ``l < m``, in the gamma vector."""
    if not 0 <= l < m:
        raise IndexError(f"need 0 <= l < m, got m={m}, l={l}")
    return m * (m - 1) // 2 + l


def dim_from_gamma(r: int) -> int:
    q = int(round((1 + np.sqrt(1 + 8 * r)) / 2))
    if n_gamma(q) != r:
        raise InvalidParameterError(f"{r} is not a triangular number q(q-1)/2")
    return q


def unit_lower(gamma, q: int) -> np.ndarray:
    g = np.eye(q)
    rows, cols = gamma_index(q)
    g[rows, cols] = gamma
    return g


@dataclass(frozen=True)
class CholeskyFactors:
    lam: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise InvalidParameterError("lambda entries must be finite and >= 0")
        if gamma.shape[0] != n_gamma(lam.shape[0]):
            raise InvalidParameterError(
                f"gamma must have {n_gamma(lam.shape[0])} entries for q={lam.shape[0]}"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)

    @property
    def q(self) -> int:
        return self.lam.shape[0]

    @property
    def Gamma(self) -> np.ndarray:
        return unit_lower(self.gamma, self.q)

    @classmethod
    def identity(cls, q: int) -> "CholeskyFactors":
        return cls(np.ones(q), np.zeros(n_gamma(q)))


def compose(f: CholeskyFactors) -> np.ndarray:
    """Covariance ``Lambda Gamma Gamma' Lambda``.

    A zero ``lam[l]`` zeroes row and column ``l`` exactly.
    """
    low = f.lam[:, None] * f.Gamma
    omega = low @ low.T
    return 0.5 * (omega + omega.T)


def decompose(omega) -> CholeskyFactors:
    """Inverse of :func:`compose` for a symmetric positive definite matrix.

    The lower Cholesky factor ``L`` equals ``Lambda Gamma``, so ``lam`` is its
    diagonal and each row of ``Gamma`` is the matching row of ``L`` divided by
    its diagonal element.
    """
    omega = np.asarray(omega, dtype=float)
    low = cholesky_lower(0.5 * (omega + omega.T))
    lam = np.diag(low).copy()
    g = low / lam[:, None]
    rows, cols = gamma_index(omega.shape[0])
    return CholeskyFactors(lam, g[rows, cols])


def corr_from_gamma(row_m, row_l) -> float:
    """Correlation ``rho_ml`` from two rows of ``Gamma`` alone.

    ``row_m`` holds ``(g_m1, ..., g_m,m-1)`` and ``row_l`` holds
    ``(g_l1, ..., g_l,l-1)`` with ``l < m``; ``l`` is implied by ``len(row_l)``.
    The result is the cosine between the two full rows of ``Gamma``.
    """
    row_m = np.asarray(row_m, dtype=float)
    row_l = np.asarray(row_l, dtype=float)
    k = row_l.shape[0]
    if k >= row_m.shape[0]:
        raise ValueError("row_l must be shorter than row_m (l < m)")
    num = row_m[k] + row_l @ row_m[:k]
    den = np.sqrt((1.0 + row_l @ row_l) * (1.0 + row_m @ row_m))
    return float(num / den)


def gamma_rows(gamma, q: int) -> list[np.ndarray]:
    """Split the stored vector into the strictly lower rows of ``Gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    return [gamma[m * (m - 1) // 2: m * (m - 1) // 2 + m] for m in range(q)]


def corr_of_gamma(gamma, q: int) -> np.ndarray:
    """Full correlation matrix implied by ``gamma``; ``lam`` plays no part."""
    g = unit_lower(gamma, q)
    c = g @ g.T
    s = 1.0 / np.sqrt(np.diag(c))
    rho = c * s[:, None] * s[None, :]
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    return rho


def corr_matrix(f: CholeskyFactors) -> tuple[np.ndarray, tuple[int, ...]]:
    """Correlation matrix of ``compose(f)`` and the indices with zero variance.

    Excluded indices (``lam == 0``) get a unit diagonal and zero off-diagonal
    entries rather than NaN.
    """
    omega = compose(f)
    d = np.diag(omega)
    keep = d > 0
    s = np.zeros_like(d)
    s[keep] = 1.0 / np.sqrt(d[keep])
    rho = omega * s[:, None] * s[None, :]
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    return rho, tuple(int(i) for i in np.flatnonzero(~keep))


def build_u_vector(a, z, lam) -> np.ndarray:
    """Regressors of the gamma-regression: ``u[(m, l)] = a_l lam_m z_m``.

    Satisfies ``z' Lambda Gamma a = sum_l a_l lam_l z_l + u' gamma`` for any gamma.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(z, dtype=float) * np.asarray(lam, dtype=float)
    rows, cols = gamma_index(a.shape[0])
    return w[rows] * a[cols]


def build_t_vector(a, z, gamma) -> np.ndarray:
    """Regressors of the lambda-regression: ``t_l = z_l (a_l + sum_{k<l} g_lk a_k)``.

    Satisfies ``z' Lambda Gamma a = t' lam`` for any lam.
    """
    a = np.asarray(a, dtype=float)
    return np.asarray(z, dtype=float) * (unit_lower(gamma, a.shape[0]) @ a)
