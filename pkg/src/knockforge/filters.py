"""The knockoff filter: importance statistics, thresholds, selection.

The LCD statistic is the difference of absolute lasso coefficients of a
column and its knockoff, fitted jointly with cross-validated penalty.
Standardization is per column and the coordinate visiting order is a
seeded permutation of positions, so swapping a column with its knockoff
permutes the solver's inputs exactly and W flips sign to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel, linalg
from .errors import InvalidInputError, NotPositiveDefiniteError
from .gaussian import SVector
from .results import KnockoffResult
from .rng import RngStream

DEFAULT_Q = 0.20
DEFAULT_FOLDS = 10
DEFAULT_N_LAMBDA = 50


@dataclass
class LassoFit:
    coef: np.ndarray          # original input scale
    coef_std: np.ndarray      # unit-norm standardized scale
    lambda_selected: float
    lambda_path: np.ndarray
    cv_error: np.ndarray
    intercept: float = 0.0
    constant_response: bool = False


@dataclass
class WStatistics:
    w: np.ndarray
    statistic_kind: str
    lambda_selected: float


@dataclass
class SelectionResult:
    threshold: float
    selected: np.ndarray
    mode: str
    q: float


def _standardize_columns(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = A.mean(axis=0)
    Ac = A - means
    norms = np.linalg.norm(Ac, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return Ac / safe, means, safe


def _fold_ids(n: int, folds: int, stream: RngStream) -> np.ndarray:
    ids = np.empty(n, dtype=int)
    perm = stream.permutation(n)
    ids[perm] = np.arange(n) % folds
    return ids


def cv_lasso_path(
    A: np.ndarray,
    y: np.ndarray,
    folds: int = DEFAULT_FOLDS,
    n_lambda: int = DEFAULT_N_LAMBDA,
    rng: RngStream | None = None,
    family: str = "linear",
    tol: float = 1e-7,
    paired: bool = False,
    fold_max_sweeps: int = 30,
) -> LassoFit:
    """Coordinate-descent lasso over a log-spaced path (3 decades below
    lambda_max = max_j |A_j'y|/n), with the penalty chosen by K-fold
    cross-validation.  Columns are standardized internally (centered, unit
    norm); coefficients come back in the original scale via coef_std.

    Fold fits run with a sweep cap (the dense path tail of a knockoff
    design is nearly collinear and never wins the CV anyway); the final
    fit at the selected penalty runs to full convergence.  With
    paired=True, CV predictions accumulate column pairs (j, j+d/2)
    jointly, which makes the selected penalty exactly invariant to
    swapping a column with its knockoff."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = A.shape
    if len(y) != n:
        raise InvalidInputError("y length must match the row count of A")
    if n_lambda < 2:
        raise InvalidInputError("n_lambda must be at least 2")
    if folds < 2 or folds > n:
        raise InvalidInputError("folds must lie in [2, n]")
    rng = rng if rng is not None else RngStream(0)
    A_std, _, norms = _standardize_columns(A)
    logistic = family == "logistic"
    if logistic:
        y_work = y
        grad0 = np.abs(A_std.T @ (y - y.mean())) / n
    else:
        y_work = y - y.mean()
        grad0 = np.abs(A_std.T @ y_work) / n
    lam_max = float(grad0.max())
    if lam_max <= 0.0:
        return LassoFit(
            coef=np.zeros(d),
            coef_std=np.zeros(d),
            lambda_selected=0.0,
            lambda_path=np.zeros(1),
            cv_error=np.zeros(1),
            constant_response=True,
        )
    lams = lam_max * np.logspace(0.0, -3.0, n_lambda)
    order = rng.derive("order").permutation(d)

    def fit_path(rows, path, max_sweeps):
        if logistic:
            return accel.logistic_cd_path(A_std[rows], y_work[rows], path, order, tol, max_sweeps)
        betas = accel.lasso_cd_path(A_std[rows], y_work[rows], path, order, tol, max_sweeps)
        return betas, np.zeros(len(path))

    def predict(rows, betas, b0s):
        At = A_std[rows]
        if paired and d % 2 == 0:
            half = d // 2
            eta = np.zeros((At.shape[0], betas.shape[0]))
            for j in range(half):
                eta += np.outer(At[:, j], betas[:, j]) + np.outer(
                    At[:, half + j], betas[:, half + j]
                )
            return eta + b0s
        return At @ betas.T + b0s

    fold_id = _fold_ids(n, folds, rng.derive("folds"))
    cv = np.zeros(n_lambda)
    for f in range(folds):
        test = fold_id == f
        betas, b0s = fit_path(np.flatnonzero(~test), lams, fold_max_sweeps)
        eta = predict(np.flatnonzero(test), betas, b0s)
        if logistic:
            prob = np.clip(1.0 / (1.0 + np.exp(-eta)), 1e-12, 1 - 1e-12)
            yt = y_work[test][:, None]
            loss = -2.0 * (yt * np.log(prob) + (1 - yt) * np.log(1 - prob)).mean(axis=0)
        else:
            loss = ((eta - y_work[test][:, None]) ** 2).mean(axis=0)
        cv += loss
    cv /= folds
    best = int(np.argmin(cv))
    # Warm starts only flow from larger penalties down, so fitting the
    # truncated path reproduces the full-path solution at lams[best].
    betas, b0s = fit_path(np.arange(n), lams[: best + 1], 2000)
    coef_std = betas[-1]
    return LassoFit(
        coef=coef_std / norms,
        coef_std=coef_std,
        lambda_selected=float(lams[best]),
        lambda_path=lams,
        cv_error=cv,
        intercept=float(b0s[-1]),
    )


def kkt_violation(A: np.ndarray, y: np.ndarray, coef_std: np.ndarray, lam: float) -> float:
    """Max stationarity violation of the standardized lasso solution."""
    A_std, _, _ = _standardize_columns(np.asarray(A, dtype=np.float64))
    y_c = np.asarray(y, dtype=np.float64) - np.mean(y)
    r = y_c - A_std @ coef_std
    g = A_std.T @ r / len(y_c)
    active = coef_std != 0
    viol = 0.0
    if np.any(~active):
        viol = max(viol, float(np.max(np.abs(g[~active])) - lam))
    if np.any(active):
        viol = max(viol, float(np.max(np.abs(g[active] - lam * np.sign(coef_std[active])))))
    return viol


def lcd_statistics(
    X: np.ndarray,
    X_tilde: np.ndarray,
    y: np.ndarray,
    rng: RngStream,
    family: str = "linear",
    folds: int = DEFAULT_FOLDS,
    n_lambda: int = DEFAULT_N_LAMBDA,
) -> WStatistics:
    """Lasso coefficient-difference statistic W_j = |b_j| - |b_{j+p}| at the
    cross-validated penalty on [X, X_tilde].

    Bit-identical column pairs are forced to W_j = 0: the fitted objective
    cannot distinguish them and zero is the exact symmetric value.
    """
    X = np.asarray(X, dtype=np.float64)
    X_tilde = np.asarray(X_tilde, dtype=np.float64)
    if X.shape != X_tilde.shape:
        raise InvalidInputError("X and X_tilde must have the same shape")
    p = X.shape[1]
    dupes = np.array([np.array_equal(X[:, j], X_tilde[:, j]) for j in range(p)])
    fit = cv_lasso_path(
        np.concatenate([X, X_tilde], axis=1), y, folds, n_lambda, rng, family, paired=True
    )
    z = np.abs(fit.coef_std[:p])
    zt = np.abs(fit.coef_std[p:])
    w = z - zt
    w[dupes] = 0.0
    return WStatistics(w=w, statistic_kind="lcd", lambda_selected=fit.lambda_selected)


def knockoff_threshold(W, q: float = DEFAULT_Q, plus: bool = True) -> SelectionResult:
    """Knockoff / knockoff+ threshold over the candidate set {|W_j| : W_j != 0}."""
    w = W.w if isinstance(W, WStatistics) else np.asarray(W, dtype=np.float64)
    if not 0.0 < q < 1.0:
        raise InvalidInputError("q must lie in (0, 1)")
    offset = 1 if plus else 0
    candidates = np.unique(np.abs(w[w != 0.0]))
    threshold = np.inf
    for t in candidates:
        pos = int(np.count_nonzero(w >= t))
        neg = int(np.count_nonzero(w <= -t))
        if pos == 0:
            continue
        if (offset + neg) / pos <= q:
            threshold = float(t)
            break
    selected = np.flatnonzero(w >= threshold) if np.isfinite(threshold) else np.array([], dtype=int)
    return SelectionResult(
        threshold=threshold,
        selected=selected,
        mode="knockoff_plus" if plus else "knockoff",
        q=q,
    )


def unconditional_gaussian_knockoffs(
    X: np.ndarray, mu: np.ndarray, Sigma: np.ndarray, s, rng: RngStream
) -> KnockoffResult:
    """Model-X Gaussian knockoffs with exactly known (mu, Sigma): rows are
    sampled independently from the conditional Gaussian."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    mu = np.asarray(mu, dtype=np.float64).reshape(p)
    Sigma = np.asarray(Sigma, dtype=np.float64)
    svec = s.s if isinstance(s, SVector) else np.asarray(s, dtype=np.float64)
    if np.any(svec <= 0.0):
        raise NotPositiveDefiniteError("s must be strictly positive")
    factor = linalg.chol_factor(Sigma, "Sigma")
    P = linalg.chol_solve(factor, np.diag(svec))
    V = 2.0 * np.diag(svec) - np.diag(svec) @ P
    Lv = linalg.upper_cholesky(0.5 * (V + V.T), "conditional knockoff covariance")
    E = rng.normal((n, p))
    x_tilde = mu + (X - mu) @ (np.eye(p) - P) + E @ Lv
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=np.zeros(p, dtype=bool),
        info={"method": "unconditional_gaussian", "s": svec},
    )


def knockoffs_with_unlabeled(X: np.ndarray, X_u: np.ndarray | None, generator) -> KnockoffResult:
    """Stacks labeled over unlabeled rows, generates knockoffs for the stack,
    and keeps the first n rows; triviality is judged on those rows."""
    X = np.asarray(X)
    n = X.shape[0]
    if X_u is None or (hasattr(X_u, "shape") and X_u.shape[0] == 0):
        return generator(X)
    X_u = np.asarray(X_u)
    if X_u.ndim != 2 or X_u.shape[1] != X.shape[1]:
        raise InvalidInputError("unlabeled rows must have the same column count as X")
    full = generator(np.concatenate([X, X_u], axis=0))
    x_tilde = full.x_tilde[:n]
    trivial = np.array(
        [bool(np.array_equal(x_tilde[:, j], X[:, j])) for j in range(X.shape[1])]
    )
    return KnockoffResult(x_tilde=x_tilde, trivial=trivial, info=dict(full.info, unlabeled=X_u.shape[0]))


def fdp_and_power(selected, truth, p: int) -> tuple[float, float]:
    """False discovery proportion and power with the 0/0 = 0 convention."""
    sel = set(int(j) for j in selected)
    tru = set(int(j) for j in truth)
    if not tru <= set(range(p)):
        raise InvalidInputError("truth indices must lie in [0, p)")
    fdp = len(sel - tru) / max(len(sel), 1)
    power = len(sel & tru) / len(tru) if tru else 0.0
    return fdp, power
