"""Conditional knockoffs for multivariate Gaussian models.

Constructions condition on the sample mean and covariance (or on a known
mean, or additionally on a set of fixed columns).  All of them preserve
their conditioned Gram statistics exactly up to floating point roundoff;
the randomness enters only through a Gaussian matrix that is
orthonormalized against the observed columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DegenerateInputError,
    DimensionError,
    InfeasibleError,
    InvalidInputError,
    NotPositiveDefiniteError,
)
from .results import KnockoffResult
from .rng import RngStream

CONDITION_LIMIT = 1e10
DEFAULT_EPSILON = 1e-2


@dataclass
class GaussianSuffStats:
    """Column means and sample covariance (divided by n)."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray


@dataclass
class SVector:
    """Diagonal of the knockoff decorrelation matrix, with provenance."""

    s: np.ndarray
    method: str
    epsilon: float
    delta: float = 0.0


def _check_matrix(X: np.ndarray, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a 2-d matrix with positive shape")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return X


def compute_suff_stats(X: np.ndarray) -> GaussianSuffStats:
    """Column means and empirical covariance (X-1mu')'(X-1mu')/n."""
    X = _check_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise DimensionError(f"need at least 2 rows to form a covariance, got {n}")
    mu = X.mean(axis=0)
    Xc = X - mu
    sigma = (Xc.T @ Xc) / n
    sigma = 0.5 * (sigma + sigma.T)
    return GaussianSuffStats(mu_hat=mu, sigma_hat=sigma)


# ---------------------------------------------------------------------------
# s-vector solvers (on correlation-scale matrices)
# ---------------------------------------------------------------------------

def _check_correlation(sigma_corr: np.ndarray) -> np.ndarray:
    S = _check_matrix(sigma_corr, "sigma_corr")
    if S.shape[0] != S.shape[1]:
        raise InvalidInputError("sigma_corr must be square")
    if not np.allclose(np.diag(S), 1.0, atol=1e-8):
        raise InvalidInputError("sigma_corr must have unit diagonal")
    return 0.5 * (S + S.T)


def s_equicorrelated(sigma_corr: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> SVector:
    """s_j = (1-eps) * min(2*lambda_min, 1), equal across coordinates."""
    S = _check_correlation(sigma_corr)
    if not 0.0 <= epsilon < 1.0:
        raise InvalidInputError("epsilon must lie in [0, 1)")
    lmin = linalg.lambda_min(S)
    if lmin <= 0.0:
        raise NotPositiveDefiniteError(
            f"correlation matrix has smallest eigenvalue {lmin:.3e} <= 0"
        )
    val = (1.0 - epsilon) * min(2.0 * lmin, 1.0)
    return SVector(s=np.full(S.shape[0], val), method="equicorrelated", epsilon=epsilon)


def _sdp_coordinate_ascent(S, epsilon, delta, start):
    """Cyclic coordinate ascent for max sum(s) s.t. delta<=s<=1 and
    diag(s) <= (1-eps)*2*S, each move verified by bisection on an
    attempted-Cholesky feasibility check.

    Per-sweep increases are capped at a doubling allowance so mass spreads
    across coordinates instead of the first visited coordinate swallowing
    the slack along the binding eigendirection."""
    p = S.shape[0]
    target = (1.0 - epsilon) * 2.0 * S
    s = start.copy()

    def feasible(vec):
        return linalg.chol_feasible(target - np.diag(vec), boundary_rtol=1e-10)

    if not feasible(s):
        raise InfeasibleError(
            "SDP start point infeasible; delta too large for this matrix"
        )
    trial = s.copy()
    for sweep in range(100):
        prev = s.sum()
        for j in range(p):
            # caps reach 1.0 within ~11 sweeps, before the break can fire
            cap = min(1.0, 2.0 * s[j] + 1e-3)
            lo = s[j]
            if cap - lo < 1e-8:
                continue
            trial[:] = s
            trial[j] = lo + 1e-8
            if not feasible(trial):
                continue
            hi = cap
            trial[j] = hi
            if feasible(trial):
                s[j] = hi
                continue
            while hi - lo > 1e-8:
                mid = 0.5 * (lo + hi)
                trial[j] = mid
                if feasible(trial):
                    lo = mid
                else:
                    hi = mid
            s[j] = lo
        if s.sum() - prev < 1e-7 and sweep >= 12:
            break
    return s


def s_sdp(sigma_corr: np.ndarray, epsilon: float = DEFAULT_EPSILON, delta: float | None = None) -> SVector:
    """Coordinate-ascent solution of the knockoff SDP on a correlation matrix.

    The ascent starts from the strictly interior point delta*1 (starting on
    the equicorrelated boundary point would pin every coordinate whenever
    2*lambda_min < 1) and falls back to the equicorrelated solution if that
    ever ends lower, so the objective never loses to it.  delta defaults to
    0.1 * 2 * lambda_min.
    """
    S = _check_correlation(sigma_corr)
    if not 0.0 <= epsilon < 1.0:
        raise InvalidInputError("epsilon must lie in [0, 1)")
    lmin = linalg.lambda_min(S)
    if lmin <= 0.0:
        raise NotPositiveDefiniteError(
            f"correlation matrix has smallest eigenvalue {lmin:.3e} <= 0"
        )
    if delta is None:
        delta = 0.1 * 2.0 * lmin
    if delta < 0.0 or delta > 1.0:
        raise InfeasibleError(f"delta={delta} outside [0, 1]")
    if not linalg.chol_feasible(
        (1.0 - epsilon) * 2.0 * S - delta * np.eye(S.shape[0]), boundary_rtol=1e-10
    ):
        raise InfeasibleError(f"delta={delta} makes the SDP infeasible")
    s_eq = (1.0 - epsilon) * min(2.0 * lmin, 1.0)
    s = _sdp_coordinate_ascent(S, epsilon, delta, np.full(S.shape[0], delta))
    if s.sum() < S.shape[0] * max(s_eq, delta):
        s = np.full(S.shape[0], max(s_eq, delta))
    return SVector(s=s, method="sdp", epsilon=epsilon, delta=delta)


def s_approx_sdp(sigma_corr: np.ndarray, blocks: list[list[int]], epsilon: float = DEFAULT_EPSILON) -> SVector:
    """SDP on a block-diagonal approximation, rescaled by the largest
    feasible factor gamma (bisection, tolerance 1e-8)."""
    S = _check_correlation(sigma_corr)
    p = S.shape[0]
    seen = sorted(v for blk in blocks for v in blk)
    if seen != list(range(p)):
        raise InvalidInputError("blocks must partition the coordinate set")
    s_approx = np.empty(p)
    for blk in blocks:
        idx = np.asarray(blk, dtype=int)
        sub = S[np.ix_(idx, idx)]
        s_approx[idx] = s_sdp(sub, epsilon=epsilon).s
    target = (1.0 - epsilon) * 2.0 * S

    def feasible(g):
        return linalg.chol_feasible(target - np.diag(g * s_approx))

    hi = 1.0 / float(np.max(s_approx))
    if feasible(hi):
        gamma = hi
    else:
        lo = 0.0
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        gamma = lo
    return SVector(s=gamma * s_approx, method="approx_sdp", epsilon=epsilon)


def make_s_vector(
    sigma: np.ndarray,
    method: str = "sdp",
    epsilon: float = DEFAULT_EPSILON,
    delta: float | None = None,
    blocks: list[list[int]] | None = None,
) -> SVector:
    """Computes an s-vector for an arbitrary-scale PD matrix.

    The matrix is rescaled to correlation form internally and the result
    mapped back to the original scale (s = diag(Sigma) * s0).
    """
    S = _check_matrix(sigma, "sigma")
    d = np.diag(S).copy()
    if np.any(d <= 0.0):
        raise NotPositiveDefiniteError("sigma has a non-positive diagonal entry")
    root = np.sqrt(d)
    corr = S / np.outer(root, root)
    np.fill_diagonal(corr, 1.0)
    if method == "equicorrelated":
        sv = s_equicorrelated(corr, epsilon)
    elif method == "sdp":
        sv = s_sdp(corr, epsilon, delta)
    elif method == "approx_sdp":
        if blocks is None:
            blocks = [[j] for j in range(S.shape[0])]
        sv = s_approx_sdp(corr, blocks, epsilon)
    else:
        raise InvalidInputError(f"unknown s-vector method {method!r}")
    return SVector(s=d * sv.s, method=sv.method, epsilon=sv.epsilon, delta=sv.delta)


def _as_s_array(s, p: int, sigma: np.ndarray, s_method: str = "sdp", epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    if s is None:
        s = make_s_vector(sigma, method=s_method, epsilon=epsilon)
    vec = s.s if isinstance(s, SVector) else np.asarray(s, dtype=np.float64)
    if vec.shape != (p,):
        raise InvalidInputError(f"s must have length {p}")
    if np.any(vec <= 0.0):
        raise NotPositiveDefiniteError("s must be strictly positive")
    if not linalg.chol_feasible(2.0 * sigma - np.diag(vec), boundary_rtol=1e-9):
        raise NotPositiveDefiniteError("2*Sigma - diag(s) is not positive definite")
    return vec


def _guard_condition(sigma: np.ndarray, context: str):
    cond = linalg.condition_number(sigma)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateInputError(
            f"{context}: covariance condition number {cond:.2e} exceeds {CONDITION_LIMIT:.0e}"
        )


# ---------------------------------------------------------------------------
# Knockoff constructions
# ---------------------------------------------------------------------------

def gaussian_conditional_knockoffs(
    X: np.ndarray,
    s,
    rng: RngStream,
    s_method: str = "sdp",
    epsilon: float = DEFAULT_EPSILON,
) -> KnockoffResult:
    """Knockoffs conditional on the sample mean and covariance (n > 2p).

    x_tilde = 1 mu' + (X - 1 mu')(I - Sigma^-1 diag(s)) + U L with U the
    orthonormalized Gaussian directions and L'L = n(2 diag(s)
    - diag(s) Sigma^-1 diag(s)).
    """
    X = _check_matrix(X)
    n, p = X.shape
    if n <= 2 * p:
        raise DimensionError(f"requires n > 2p, got n={n}, p={p}")
    stats = compute_suff_stats(X)
    _guard_condition(stats.sigma_hat, "gaussian_conditional_knockoffs")
    svec = _as_s_array(s, p, stats.sigma_hat, s_method, epsilon)
    Xc = X - stats.mu_hat
    W = rng.normal((n, p))
    Q = linalg.orthonormalize(np.column_stack([np.ones(n), X, W]))
    U = Q[:, p + 1 :]
    factor = linalg.chol_factor(stats.sigma_hat, "sample covariance")
    P = linalg.chol_solve(factor, np.diag(svec))
    M = n * (2.0 * np.diag(svec) - np.diag(svec) @ P)
    L = linalg.upper_cholesky(0.5 * (M + M.T), "2*diag(s) - diag(s)*Sigma^-1*diag(s)")
    x_tilde = stats.mu_hat + Xc @ (np.eye(p) - P) + U @ L
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=np.zeros(p, dtype=bool),
        info={"s": svec, "method": "gaussian_low_dim"},
    )


def gaussian_conditional_knockoffs_known_mean(
    X: np.ndarray,
    mu: np.ndarray,
    s,
    rng: RngStream,
    s_method: str = "sdp",
    epsilon: float = DEFAULT_EPSILON,
) -> KnockoffResult:
    """Known-mean variant (n >= 2p): conditions on (X-1mu')'(X-1mu') only.

    The centered matrix is what gets orthonormalized; the 1_n column of the
    general construction is absent because the mean is not conditioned on.
    """
    X = _check_matrix(X)
    n, p = X.shape
    mu = np.asarray(mu, dtype=np.float64).reshape(p)
    if n < 2 * p:
        raise DimensionError(f"requires n >= 2p, got n={n}, p={p}")
    Xc = X - mu
    sigma = Xc.T @ Xc
    sigma = 0.5 * (sigma + sigma.T)
    _guard_condition(sigma, "gaussian_conditional_knockoffs_known_mean")
    svec = _as_s_array(s, p, sigma, s_method, epsilon)
    W = rng.normal((n, p))
    Q = linalg.orthonormalize(np.column_stack([Xc, W]))
    U = Q[:, p:]
    factor = linalg.chol_factor(sigma, "centered Gram matrix")
    P = linalg.chol_solve(factor, np.diag(svec))
    M = 2.0 * np.diag(svec) - np.diag(svec) @ P
    L = linalg.upper_cholesky(0.5 * (M + M.T), "2*diag(s) - diag(s)*Sigma^-1*diag(s)")
    x_tilde = mu + Xc @ (np.eye(p) - P) + U @ L
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=np.zeros(p, dtype=bool),
        info={"s": svec, "method": "gaussian_known_mean"},
    )


def partial_conditional_knockoffs(
    X_V: np.ndarray,
    X_B: np.ndarray | None,
    s,
    rng: RngStream,
    s_method: str = "sdp",
    epsilon: float = DEFAULT_EPSILON,
) -> KnockoffResult:
    """Knockoffs for X_V conditional on [1, X_B] as well as the Gram
    statistics of the residuals (n > 2|V| + |B|).

    Preserves exactly: [1,X_B]'x_tilde, x_tilde'x_tilde, and the residual
    cross-product R'R - diag(s).
    """
    X_V = _check_matrix(X_V, "X_V")
    n, d = X_V.shape
    if X_B is None or (hasattr(X_B, "shape") and X_B.shape[-1] == 0):
        X_B = np.empty((n, 0))
    X_B = np.asarray(X_B, dtype=np.float64).reshape(n, -1)
    if not np.all(np.isfinite(X_B)):
        raise InvalidInputError("X_B contains non-finite entries")
    b = X_B.shape[1]
    if n <= 2 * d + b:
        raise DimensionError(f"requires n > 2|V| + |B|, got n={n}, |V|={d}, |B|={b}")
    try:
        Q0 = linalg.orthonormalize(np.column_stack([np.ones(n), X_B]))
    except DegenerateInputError as exc:
        raise DegenerateInputError(f"conditioning columns [1, X_B] are collinear: {exc}") from exc
    fitted = Q0 @ (Q0.T @ X_V)
    R = X_V - fitted
    sigma = R.T @ R
    sigma = 0.5 * (sigma + sigma.T)
    _guard_condition(sigma, "partial_conditional_knockoffs")
    svec = _as_s_array(s, d, sigma, s_method, epsilon)
    W = rng.normal((n, d))
    Q = linalg.orthonormalize(np.column_stack([np.ones(n), X_B, R, W]))
    U = Q[:, 1 + b + d :]
    factor = linalg.chol_factor(sigma, "residual Gram matrix")
    P = linalg.chol_solve(factor, np.diag(svec))
    M = 2.0 * np.diag(svec) - np.diag(svec) @ P
    L = linalg.upper_cholesky(0.5 * (M + M.T), "2*diag(s) - diag(s)*Sigma^-1*diag(s)")
    x_tilde = fitted + R @ (np.eye(d) - P) + U @ L
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=np.zeros(d, dtype=bool),
        info={"s": svec, "method": "gaussian_partial"},
    )
