"""Pure-numpy implementations of the hot kernels.

These are the fallback backend (KNOCKFORGE_NUMBA=0) and the reference
semantics for the numba twins in kernels_numba.py.  Randomness comes from
the same counter-based generator as rng.py: draw i of a stream with key k
is mix64(k + (i+1)*GOLDEN) >> 11, scaled to [0,1).  Both backends consume
identical counter positions, so their sample paths agree.
"""

from __future__ import annotations

import numpy as np

from .rng import GOLDEN, MASK64, _INV53, _MIX1, _MIX2

_U64 = np.uint64


def _u01_array(key: int, counters: np.ndarray) -> np.ndarray:
    """Uniforms in [0,1) at explicit counter positions (uint64 array)."""
    z = (_U64(key) + (counters + _U64(1)) * _U64(GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    z = z ^ (z >> _U64(31))
    return (z >> _U64(11)).astype(np.float64) * _INV53


# ---------------------------------------------------------------------------
# Modified Gram-Schmidt with one reorthogonalization pass
# ---------------------------------------------------------------------------

def mgs_orthonormalize(M: np.ndarray, rank_rtol: float = 1e-10):
    """Orthonormalize the columns of M left to right.

    Returns (Q, bad) where bad is -1 on success, else the index of the
    first column whose post-projection norm fell below rank_rtol times its
    original norm.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    n, k = M.shape
    Q = np.empty((n, k))
    for j in range(k):
        v = M[:, j].copy()
        norm0 = np.sqrt(v @ v)
        if j > 0:
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        norm = np.sqrt(v @ v)
        if norm0 == 0.0 or norm < rank_rtol * norm0:
            return Q, j
        Q[:, j] = v / norm
    return Q, -1


# ---------------------------------------------------------------------------
# Lasso coordinate descent over a lambda path
# ---------------------------------------------------------------------------

def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lasso_cd_path(A, y, lams, order, tol=1e-7, max_sweeps=1000):
    """Cyclic coordinate descent on (1/2n)||y-Ab||^2 + lam*||b||_1.

    Columns of A must have unit l2 norm; y must be centered.  Coordinates
    are visited in the fixed permutation `order`; the path is solved from
    lams[0] down with warm starts.  Returns betas of shape (L, d).
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = A.shape
    L = len(lams)
    betas = np.zeros((L, d))
    beta = np.zeros(d)
    r = y.copy()
    for li in range(L):
        nlam = n * lams[li]
        budget = max_sweeps  # shared by full and active-set sweeps
        while budget > 0:
            delta = _lasso_sweep(A, r, beta, order, nlam)
            budget -= 1
            if delta < tol:
                break
            active = order[beta[order] != 0.0]
            while len(active) > 0 and budget > 0:
                budget -= 1
                if _lasso_sweep(A, r, beta, active, nlam) < tol:
                    break
        betas[li] = beta
    return betas


def _lasso_sweep(A, r, beta, idx, nlam):
    delta = 0.0
    for j in idx:
        bj = beta[j]
        rho = A[:, j] @ r + bj
        bnew = _soft(rho, nlam)
        if bnew != bj:
            r -= A[:, j] * (bnew - bj)
            beta[j] = bnew
            delta = max(delta, abs(bnew - bj))
    return delta


# ---------------------------------------------------------------------------
# Logistic lasso via proximal Newton (IRLS) coordinate descent
# ---------------------------------------------------------------------------

def _logistic_sweep(A, w, r, beta, idx, nlam):
    delta = 0.0
    for j in idx:
        bj = beta[j]
        aj = A[:, j]
        wa = w * aj
        denom = wa @ aj
        rho = wa @ r + denom * bj
        bnew = _soft(rho, nlam) / denom
        if bnew != bj:
            r -= aj * (bnew - bj)
            beta[j] = bnew
            delta = max(delta, abs(bnew - bj))
    return delta


def logistic_cd_path(A, y, lams, order, tol=1e-7, max_sweeps=1000, outer_iters=30):
    """l1-penalized logistic regression path with unpenalized intercept.

    Minimizes (1/n) sum[log(1+exp(eta)) - y*eta] + lam*||b||_1 where
    eta = b0 + A b.  max_sweeps caps the total coordinate sweeps spent per
    lambda across the proximal-Newton iterations.  Returns (betas (L,d),
    intercepts (L,)).
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = A.shape
    L = len(lams)
    betas = np.zeros((L, d))
    b0s = np.zeros(L)
    beta = np.zeros(d)
    b0 = 0.0
    for li in range(L):
        nlam = n * lams[li]
        budget = max_sweeps
        for _ in range(outer_iters):
            eta = b0 + A @ beta
            p = 1.0 / (1.0 + np.exp(-eta))
            w = np.clip(p * (1.0 - p), 1e-5, None)
            r = (y - p) / w  # working residual z - eta
            changed = 0.0
            while budget > 0:
                wsum = w.sum()
                shift = (w @ r) / wsum
                delta = abs(shift)
                if shift != 0.0:
                    b0 += shift
                    r -= shift
                delta = max(delta, _logistic_sweep(A, w, r, beta, order, nlam))
                budget -= 1
                changed = max(changed, delta)
                if delta < tol:
                    break
                active = order[beta[order] != 0.0]
                while len(active) > 0 and budget > 0:
                    budget -= 1
                    if _logistic_sweep(A, w, r, beta, active, nlam) < tol:
                        break
            if changed < 10 * tol or budget <= 0:
                break
        betas[li] = beta
        b0s[li] = b0
    return betas, b0s


# ---------------------------------------------------------------------------
# Ising model: checkerboard Gibbs sweeps and monotone CFTP
# ---------------------------------------------------------------------------
# ptable[s, nb+4] = P(spin_s = +1 | neighbor sum nb), free boundary, so
# nb ranges over -4..4.  Site s = i*side + j.  The uniform for site s in
# absolute sweep t sits at counter t*nsites + s; black sites (i+j even)
# update before white sites within a sweep.


def _neighbor_sums(spins: np.ndarray) -> np.ndarray:
    side = spins.shape[0]
    nb = np.zeros((side, side), dtype=np.int64)
    nb[1:, :] += spins[:-1, :]
    nb[:-1, :] += spins[1:, :]
    nb[:, 1:] += spins[:, :-1]
    nb[:, :-1] += spins[:, 1:]
    return nb


def _parity_masks(side: int):
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    black = (ii + jj) % 2 == 0
    return black, ~black


def ising_gibbs_sweeps(spins, ptable, key, sweep_start, n_sweeps):
    """Runs n_sweeps checkerboard heat-bath sweeps in place; returns spins."""
    spins = np.asarray(spins, dtype=np.int8)
    side = spins.shape[0]
    nsites = side * side
    black, white = _parity_masks(side)
    prob = ptable.reshape(side, side, 9)
    site_counters = np.arange(nsites, dtype=np.uint64).reshape(side, side)
    for t in range(sweep_start, sweep_start + n_sweeps):
        u = _u01_array(key, _U64(t) * _U64(nsites) + site_counters)
        for mask in (black, white):
            nb = _neighbor_sums(spins)
            pp = prob[np.arange(side)[:, None], np.arange(side)[None, :], nb + 4]
            upd = np.where(u < pp, 1, -1).astype(np.int8)
            spins[mask] = upd[mask]
    return spins


def ising_cftp(side, ptable, key, max_epochs=22):
    """Monotone coupling-from-the-past sample; returns (spins, T) or (spins, -1)
    when max_epochs doublings did not coalesce (spins then invalid)."""
    nsites = side * side
    black, white = _parity_masks(side)
    prob = ptable.reshape(side, side, 9)
    site_counters = np.arange(nsites, dtype=np.uint64).reshape(side, side)

    def sweep(spins, t):
        u = _u01_array(key, _U64(t - 1) * _U64(nsites) + site_counters)
        for mask in (black, white):
            nb = _neighbor_sums(spins)
            pp = prob[np.arange(side)[:, None], np.arange(side)[None, :], nb + 4]
            upd = np.where(u < pp, 1, -1).astype(np.int8)
            spins[mask] = upd[mask]

    T = 1
    for _ in range(max_epochs):
        top = np.ones((side, side), dtype=np.int8)
        bot = -np.ones((side, side), dtype=np.int8)
        for t in range(T, 0, -1):
            sweep(top, t)
            sweep(bot, t)
        if np.array_equal(top, bot):
            return top, T
        T *= 2
    return top, -1


# ---------------------------------------------------------------------------
# Metropolis-Hastings walk on three-way contingency tables
# ---------------------------------------------------------------------------
# Each step consumes counters 7t..7t+6: two uniforms per axis pair
# (rows from K1, columns from K3, middle from K2) and one acceptance
# uniform.  A proposal adds the 8-cell +-1 move; it is rejected outright
# if any decremented cell is zero.


def _pair_from(u0, u1, K):
    a = np.minimum((u0 * K).astype(np.int64), K - 1)
    b = np.minimum((u1 * (K - 1)).astype(np.int64), K - 2)
    b = b + (b >= a)
    return a, b


def mh_table_chain(table, key, t_max, t_start=0):
    """Runs a single MH chain for t_max steps; returns the final table."""
    tables = np.asarray(table, dtype=np.int64)[None, ...].copy()
    keys = np.array([key], dtype=np.uint64)
    out = mh_table_final_many(tables[0], keys, t_max, t_start=t_start)
    return out[0]


def mh_table_final_many(table0, keys, t_max, t_start=0):
    """Runs one chain per key from the same start table; returns final tables."""
    keys = np.asarray(keys, dtype=np.uint64)
    nc = len(keys)
    K1, K2, K3 = table0.shape
    tables = np.broadcast_to(np.asarray(table0, dtype=np.int64), (nc, K1, K2, K3)).copy()
    if K1 < 2 or K2 < 2 or K3 < 2:
        return tables
    rows = np.arange(nc)
    offsets = np.arange(7, dtype=np.uint64)
    for t in range(t_start, t_start + t_max):
        counters = (_U64(t) * _U64(7) + offsets).reshape(1, 7)
        with np.errstate(over="ignore"):
            z = keys.reshape(nc, 1) + (counters + _U64(1)) * _U64(GOLDEN)
            z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
            z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
            z = z ^ (z >> _U64(31))
        u = (z >> _U64(11)).astype(np.float64) * _INV53
        R1, R2 = _pair_from(u[:, 0], u[:, 1], K1)
        C1, C2 = _pair_from(u[:, 2], u[:, 3], K3)
        D1, D2 = _pair_from(u[:, 4], u[:, 5], K2)
        dec1 = tables[rows, R1, D1, C1]
        dec2 = tables[rows, R1, D2, C2]
        dec3 = tables[rows, R2, D2, C1]
        dec4 = tables[rows, R2, D1, C2]
        inc1 = tables[rows, R1, D2, C1]
        inc2 = tables[rows, R1, D1, C2]
        inc3 = tables[rows, R2, D1, C1]
        inc4 = tables[rows, R2, D2, C2]
        valid = (dec1 > 0) & (dec2 > 0) & (dec3 > 0) & (dec4 > 0)
        alpha = np.zeros(nc)
        np.divide(
            dec1.astype(np.float64) * dec2 * dec3 * dec4,
            (inc1 + 1.0) * (inc2 + 1.0) * (inc3 + 1.0) * (inc4 + 1.0),
            out=alpha,
            where=valid,
        )
        accept = valid & (u[:, 6] <= alpha)
        if not accept.any():
            continue
        acc = rows[accept]
        np.subtract.at(tables, (acc, R1[accept], D1[accept], C1[accept]), 1)
        np.subtract.at(tables, (acc, R1[accept], D2[accept], C2[accept]), 1)
        np.subtract.at(tables, (acc, R2[accept], D2[accept], C1[accept]), 1)
        np.subtract.at(tables, (acc, R2[accept], D1[accept], C2[accept]), 1)
        np.add.at(tables, (acc, R1[accept], D2[accept], C1[accept]), 1)
        np.add.at(tables, (acc, R1[accept], D1[accept], C2[accept]), 1)
        np.add.at(tables, (acc, R2[accept], D1[accept], C1[accept]), 1)
        np.add.at(tables, (acc, R2[accept], D2[accept], C2[accept]), 1)
    return tables
