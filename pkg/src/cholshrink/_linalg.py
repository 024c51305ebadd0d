import numpy as np

from .errors import NotPositiveDefiniteError

PIVOT_RTOL = 1e-12


def _failing_pivot(mat: np.ndarray, rtol: float) -> int:
    a = np.array(mat, dtype=float, copy=True)
    n = a.shape[0]
    tol = rtol * max(float(np.max(np.diag(a))), 0.0)
    for k in range(n):
        piv = a[k, k]
        if not piv > tol:
            return k
        a[k + 1:, k] /= np.sqrt(piv)
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k + 1:, k])
        a[k, k] = np.sqrt(piv)
    return n - 1


def cholesky_lower(mat, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Lower Cholesky factor, rejecting pivots below ``rtol * max(diag)``."""
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] == 0:
        return a.copy()
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "matrix is not positive definite", pivot=_failing_pivot(a, rtol)
        ) from None
    tol = rtol * float(np.max(np.diag(a)))
    piv = np.diag(low) ** 2
    bad = np.flatnonzero(~(piv > tol))
    if bad.size:
        raise NotPositiveDefiniteError("matrix is numerically singular", pivot=int(bad[0]))
    return low


def spd_solve(mat: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``mat @ x = rhs`` for SPD ``mat``; returns ``(x, L)``."""
    low = cholesky_lower(mat)
    from scipy.linalg import cho_solve

    return cho_solve((low, True), rhs), low
