"""Prior hyperparameters and the moment-matching (MM) prior for ``gamma``.

The MM prior picks a Gaussian ``gamma ~ N(mu, Psi)`` so that every implied
correlation ``rho_ml`` has (to first order) the same prior mean ``u`` and
variance ``v``, whatever its distance from the diagonal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from .cholesky import gamma_index, n_gamma
from .errors import ConfigError, InfeasibleTargetError
from .rand_dists import draw_gamma


@dataclass(frozen=True)
class BetaPrior:
    """Spike-and-slab with a Zellner g-prior slab for the fixed effects.

    ``g_rate=None`` means ``N / 2`` with ``N`` the number of observations.
    """

    p0: float = 0.5
    a_p: float = 1.0
    b_p: float = 1.0
    update_p0: bool = False
    g_shape: float = 0.5
    g_rate: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ConfigError("p0 must lie in [0, 1]")
        _check_positive(a_p=self.a_p, b_p=self.b_p, g_shape=self.g_shape)
        if self.g_rate is not None:
            _check_positive(g_rate=self.g_rate)

    def g_rate_for(self, n_obs: int) -> float:
        return self.g_rate if self.g_rate is not None else n_obs / 2.0


@dataclass(frozen=True)
class LambdaPrior:
    """Zero-inflated half-normal: ``p_zero * delta_0 + (1 - p_zero) N+(0, sigma2 phi2)``,
    ``phi2 ~ IG(phi_shape, phi_rate)``."""

    p_zero: float = 0.5
    phi_shape: float = 0.5
    phi_rate: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_zero <= 1.0:
            raise ConfigError("p_zero must lie in [0, 1]")
        _check_positive(phi_shape=self.phi_shape, phi_rate=self.phi_rate)


@dataclass(frozen=True)
class NEGPrior:
    """``gamma_ml ~ N(0, sigma2 psi_ml)``, ``psi_ml ~ Exp(delta2 / 2)``,
    ``delta2 ~ G(c0, d0)``, ``d0 ~ G(d0_shape, d0_rate)``."""

    c0: float = 1.0
    d0_shape: float = 1.0
    d0_rate: float = 1.0

    kind = "neg"

    def __post_init__(self):
        _check_positive(c0=self.c0, d0_shape=self.d0_shape, d0_rate=self.d0_rate)


@dataclass(frozen=True)
class MMSpec:
    """Common prior mean ``u`` and variance ``v`` for every correlation."""

    u: float = 0.1
    v: float = 0.09

    kind = "mm"

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)) or self.v <= 0:
            raise ConfigError("MM prior needs finite u and v > 0")
        half = 3.0 * math.sqrt(self.v)
        if not (-1.0 <= self.u <= 1.0 and -1.0 <= self.u - half and self.u + half <= 1.0):
            raise ConfigError(
                f"(u, v) = ({self.u}, {self.v}) violates u +/- 3 sqrt(v) in [-1, 1]"
            )


@dataclass(frozen=True)
class Sigma2Prior:
    """``sigma2 ~ IG(shape, rate)``; the default (0, 0) is the Jeffreys prior."""

    shape: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.shape < 0 or self.rate < 0:
            raise ConfigError("sigma2 prior shape and rate must be >= 0")

    @property
    def is_proper(self) -> bool:
        return self.shape > 0 and self.rate > 0


GammaPrior = Union[NEGPrior, MMSpec]


@dataclass(frozen=True)
class PriorSpec:
    beta: BetaPrior = field(default_factory=BetaPrior)
    lam: LambdaPrior = field(default_factory=LambdaPrior)
    gamma: GammaPrior = field(default_factory=NEGPrior)
    sigma2: Sigma2Prior = field(default_factory=Sigma2Prior)

    @property
    def gamma_kind(self) -> str:
        return self.gamma.kind

    def to_dict(self) -> dict:
        return {
            "beta": asdict(self.beta),
            "lambda": asdict(self.lam),
            "gamma": {"kind": self.gamma.kind, **asdict(self.gamma)},
            "sigma2": asdict(self.sigma2),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        g = dict(d.get("gamma", {}))
        kind = g.pop("kind", "neg")
        if kind == "neg":
            gamma = NEGPrior(**g)
        elif kind == "mm":
            gamma = MMSpec(**g)
        else:
            raise ConfigError(f"unknown gamma prior kind {kind!r}")
        try:
            return cls(
                beta=BetaPrior(**d.get("beta", {})),
                lam=LambdaPrior(**d.get("lambda", {})),
                gamma=gamma,
                sigma2=Sigma2Prior(**d.get("sigma2", {})),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _check_positive(**kw):
    for name, val in kw.items():
        if not (math.isfinite(val) and val > 0):
            raise ConfigError(f"{name} must be finite and > 0, got {val!r}")


# --- moment matching -------------------------------------------------------


def mm_solve_means(u: float, q: int) -> np.ndarray:
    """Prior means of ``gamma`` whose plug-in correlation is exactly ``u``.

    Returns the means in stored (row-major lower triangle) order.
    """
    if u == 1.0:
        raise InfeasibleTargetError("u = 1 makes the mean equations singular")
    rows, cols = gamma_index(q)
    mu = np.empty(rows.shape[0])
    for pos, (m0, l0) in enumerate(zip(rows, cols)):
        m, l = int(m0) + 1, int(l0) + 1
        den_m = (1 + (m - 1) * u) * (1 - u)
        rad_m = (1 + (m - 2) * u) / den_m if den_m != 0 else -1.0
        if not rad_m > 0:
            raise InfeasibleTargetError(f"u={u} infeasible at (m, l) = ({m}, 1)")
        first = u * math.sqrt(rad_m)
        if l == 1:
            mu[pos] = first
            continue
        den_l = (1 + (l - 2) * u) * (1 + (l - 1) * u)
        rad_l = (1 - u) / den_l if den_l != 0 else -1.0
        if not rad_l > 0:
            raise InfeasibleTargetError(f"u={u} infeasible at (m, l) = ({m}, {l})")
        mu[pos] = first * math.sqrt(rad_l)
    return mu


def _lower(vec, q: int) -> np.ndarray:
    mat = np.zeros((q, q))
    rows, cols = gamma_index(q)
    mat[rows, cols] = vec
    return mat


def corr_gradient(mu, q: int, m: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``rho_ml`` at ``mu`` (0-based ``l < m``).

    Returns ``(d/d row m entries 0..m-1, d/d row l entries 0..l-1)``. The
    row-``m`` part follows the three-case formula (k < l, k = l, k > l).
    """
    M = _lower(mu, q)
    rm, rl = M[m, :m], M[l, :l]
    A = 1.0 + rl @ rl
    B = 1.0 + rm @ rm
    num = M[m, l] + rl @ rm[:l]
    d = A ** -0.5 * B ** -1.5
    grad_m = np.empty(m)
    grad_m[:l] = d * (rl * B - num * rm[:l])
    grad_m[l] = d * (B - rm[l] * num)
    grad_m[l + 1:] = -d * rm[l + 1:] * num
    grad_l = A ** -1.5 * B ** -0.5 * (rm[:l] * A - num * rl)
    return grad_m, grad_l


def mm_solve_variances(u: float, v: float, q: int, mu) -> tuple[np.ndarray, np.ndarray]:
    """Within-row variances and cross-row covariances of ``gamma``.

    Row ``m`` entries are independent with common variance ``psi_within[m]``,
    fixed by matching the linearised variance of ``rho_m1`` to ``v``. Every
    pair of entries from rows ``l != m`` shares the covariance
    ``psi_cross[m, l]``, chosen so the linearised variance of ``rho_ml`` equals
    ``v``. Row 0 of ``Gamma`` has no free entries; its slots are zero.
    """
    if not v > 0:
        raise InfeasibleTargetError("v must be > 0")
    mu = np.asarray(mu, dtype=float)
    within = np.zeros(q)
    for m in range(1, q):
        gm, _ = corr_gradient(mu, q, m, 0)
        ss = gm @ gm
        if not ss > 0:
            raise InfeasibleTargetError(f"zero gradient for row {m + 1}")
        within[m] = v / ss
    cross = np.zeros((q, q))
    for m in range(2, q):
        for l in range(1, m):
            gm, gl = corr_gradient(mu, q, m, l)
            base = within[m] * (gm @ gm) + within[l] * (gl @ gl)
            denom = 2.0 * gm.sum() * gl.sum()
            resid = v - base
            if abs(denom) < 1e-12:
                if abs(resid) > 1e-10 * v:
                    raise InfeasibleTargetError(
                        f"cannot match variance at (m, l) = ({m + 1}, {l + 1})"
                    )
                c = 0.0
            else:
                c = resid / denom
            cross[m, l] = cross[l, m] = c
    return within, cross


def row_cross_average(cross) -> np.ndarray:
    """Per-row summary of the cross-row covariances (mean over earlier rows)."""
    cross = np.asarray(cross)
    q = cross.shape[0]
    out = np.zeros(q)
    for m in range(2, q):
        out[m] = cross[m, 1:m].mean()
    return out


def mm_assemble_psi(within, cross, q: int) -> tuple[np.ndarray, bool]:
    """Full covariance of the stored gamma vector.

    Returns ``(Psi, clipped)``. When the assembled matrix has negative
    eigenvalues it is replaced by its eigenvalue-clipped PSD projection and
    ``clipped`` is True.
    """
    within = np.asarray(within, dtype=float)
    cross = np.asarray(cross, dtype=float)
    rows, cols = gamma_index(q)
    same_row = rows[:, None] == rows[None, :]
    psi = np.where(same_row, 0.0, cross[rows[:, None], rows[None, :]])
    psi[np.diag_indices_from(psi)] = within[rows]
    psi = 0.5 * (psi + psi.T)
    if psi.size == 0:
        return psi, False
    w, vecs = np.linalg.eigh(psi)
    tol = 1e-12 * max(float(np.abs(w).max()), 1.0)
    if w.min() >= -tol:
        return psi, False
    w = np.clip(w, 0.0, None)
    fixed = (vecs * w) @ vecs.T
    return 0.5 * (fixed + fixed.T), True


def linearized_corr_var(mu, psi, q: int) -> np.ndarray:
    """First-order (delta method) variance of each ``rho_ml`` under ``N(mu, psi)``.

    Returned as a q x q matrix with entries in the strictly lower triangle.
    """
    psi = np.asarray(psi, dtype=float)
    out = np.zeros((q, q))
    for m in range(1, q):
        for l in range(m):
            gm, gl = corr_gradient(mu, q, m, l)
            full = np.zeros(n_gamma(q))
            start_m = m * (m - 1) // 2
            full[start_m:start_m + m] = gm
            start_l = l * (l - 1) // 2
            full[start_l:start_l + l] += gl
            out[m, l] = full @ psi @ full
    return out


@dataclass(frozen=True)
class MMPrior:
    q: int
    u: float
    v: float
    mu: np.ndarray
    psi_within: np.ndarray
    psi_cross: np.ndarray
    psi: np.ndarray
    precision: np.ndarray
    clipped: bool

    @property
    def psi_m2(self) -> np.ndarray:
        return row_cross_average(self.psi_cross)

    @classmethod
    def build(cls, u: float, v: float, q: int) -> "MMPrior":
        MMSpec(u, v)
        mu = mm_solve_means(u, q)
        within, cross = mm_solve_variances(u, v, q, mu)
        psi, clipped = mm_assemble_psi(within, cross, q)
        if clipped:
            warnings.warn(
                f"MM prior covariance for (u, v, q) = ({u}, {v}, {q}) was not PSD; "
                "negative eigenvalues clipped",
                RuntimeWarning,
                stacklevel=2,
            )
        precision = _precision(psi, ridge=clipped)
        return cls(q, u, v, mu, within, cross, psi, precision, clipped)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        w, vecs = np.linalg.eigh(self.psi)
        root = vecs * np.sqrt(np.clip(w, 0.0, None))
        shape = (self.mu.shape[0],) if size is None else (size, self.mu.shape[0])
        z = rng.standard_normal(shape)
        return self.mu + z @ root.T


def _precision(psi: np.ndarray, ridge: bool) -> np.ndarray:
    if psi.size == 0:
        return psi.copy()
    if ridge:
        psi = psi + 1e-8 * np.trace(psi) / psi.shape[0] * np.eye(psi.shape[0])
    low = np.linalg.cholesky(psi)
    inv_low = np.linalg.inv(low)
    prec = inv_low.T @ inv_low
    return 0.5 * (prec + prec.T)


def neg_init(c0: float, d0: float, r: int, rng: np.random.Generator) -> tuple[float, np.ndarray]:
    """Initial ``(delta2, psi)`` from the NEG hierarchy given ``d0``."""
    delta2 = draw_gamma(rng, c0, d0)
    psi = rng.exponential(2.0 / delta2, size=r)
    return delta2, np.maximum(psi, np.finfo(float).tiny)
