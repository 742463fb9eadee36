"""Dense symmetric linear algebra helpers.

The extreme-eigenvalue solver is Householder tridiagonalization followed
by Sturm-sequence bisection; tests check it against numpy's dense
eigendecomposition.  Positive-definite solves go through Cholesky
factorizations, never explicit inverses.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import accel
from .errors import DegenerateInputError, NotPositiveDefiniteError


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Raises DegenerateInputError when a column's projection residual falls
    below 1e-10 of its original norm.
    """
    Q, bad = accel.mgs_orthonormalize(np.asarray(M, dtype=np.float64))
    if bad >= 0:
        raise DegenerateInputError(
            f"rank deficiency detected at column {bad} during orthonormalization"
        )
    return Q


def tridiagonalize(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns (diagonal, off-diagonal); eigenvalues are preserved.
    """
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    for k in range(n - 2):
        x = A[k + 1 :, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(nx, x[0])
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        # Apply H = I - 2 v v^T on both sides of the trailing block.
        B = A[k + 1 :, k + 1 :]
        w = B @ v
        tau = v @ w
        w -= tau * v
        B -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        new_edge = x[0] - 2.0 * v[0] * (v @ x)
        A[k + 1 :, k] = 0.0
        A[k, k + 1 :] = 0.0
        A[k + 1, k] = new_edge
        A[k, k + 1] = new_edge
    return np.diag(A).copy(), np.diag(A, 1).copy()


def _count_below(diag: np.ndarray, off: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the tridiagonal matrix strictly below x."""
    count = 0
    d = diag[0] - x
    if d < 0:
        count += 1
    tiny = 1e-300
    for i in range(1, len(diag)):
        if d == 0.0:
            d = tiny
        d = (diag[i] - x) - off[i - 1] * off[i - 1] / d
        if d < 0:
            count += 1
    return count


def symmetric_eig_extremes(S: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of a symmetric matrix by bisection."""
    S = np.asarray(S, dtype=np.float64)
    if S.shape == (1, 1):
        return float(S[0, 0]), float(S[0, 0])
    diag, off = tridiagonalize(S)
    radius = np.zeros_like(diag)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo0 = float(np.min(diag - radius))
    hi0 = float(np.max(diag + radius))
    scale = max(1.0, abs(lo0), abs(hi0))
    width = tol * scale

    def bisect(target_count: int) -> float:
        lo, hi = lo0, hi0
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if _count_below(diag, off, mid) >= target_count:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    n = len(diag)
    return bisect(1), bisect(n)


def lambda_min(S: np.ndarray, tol: float = 1e-10) -> float:
    return symmetric_eig_extremes(S, tol)[0]


def condition_number(S: np.ndarray) -> float:
    lmin, lmax = symmetric_eig_extremes(S)
    if lmin <= 0.0:
        return np.inf
    return lmax / lmin


def chol_feasible(M: np.ndarray, boundary_rtol: float = 1e-12) -> bool:
    """True when M is PSD up to a boundary jitter, checked by Cholesky."""
    M = np.asarray(M, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(np.diag(M)))))
    try:
        np.linalg.cholesky(M + boundary_rtol * scale * np.eye(M.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def chol_factor(S: np.ndarray, context: str = "matrix"):
    try:
        return scipy.linalg.cho_factor(np.asarray(S, dtype=np.float64), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{context} is not positive definite") from exc


def chol_solve(factor, B: np.ndarray) -> np.ndarray:
    return scipy.linalg.cho_solve(factor, np.asarray(B, dtype=np.float64))


def upper_cholesky(M: np.ndarray, context: str = "matrix") -> np.ndarray:
    """Factor M = L^T L with L upper triangular (transposed numpy factor)."""
    try:
        return np.linalg.cholesky(np.asarray(M, dtype=np.float64)).T
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{context} is not positive definite") from exc
