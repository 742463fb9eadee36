"""Numba @njit implementations of the hot kernels.

Mirrors kernels_numpy.py exactly: same signatures, same counter-based
randomness layout (see rng.py), so either backend reproduces the other's
sample paths.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import GOLDEN, _INV53, _MIX1, _MIX2

_G = np.uint64(GOLDEN)
_M1 = np.uint64(_MIX1)
_M2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)


@njit(cache=True)
def _u01(key, counter):
    z = key + (counter + _ONE) * _G
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * _INV53


# ---------------------------------------------------------------------------
# Modified Gram-Schmidt
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mgs(M, rank_rtol):
    n, k = M.shape
    Q = np.empty((n, k))
    for j in range(k):
        v = M[:, j].copy()
        norm0 = 0.0
        for i in range(n):
            norm0 += v[i] * v[i]
        norm0 = np.sqrt(norm0)
        for _ in range(2):
            for c in range(j):
                dot = 0.0
                for i in range(n):
                    dot += Q[i, c] * v[i]
                for i in range(n):
                    v[i] -= dot * Q[i, c]
        norm = 0.0
        for i in range(n):
            norm += v[i] * v[i]
        norm = np.sqrt(norm)
        if norm0 == 0.0 or norm < rank_rtol * norm0:
            return Q, j
        for i in range(n):
            Q[i, j] = v[i] / norm
    return Q, -1


def mgs_orthonormalize(M, rank_rtol: float = 1e-10):
    return _mgs(np.ascontiguousarray(M, dtype=np.float64), rank_rtol)


# ---------------------------------------------------------------------------
# Lasso coordinate descent over a lambda path
# ---------------------------------------------------------------------------

@njit(cache=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def _lasso_sweep(A, r, beta, idx, nlam):
    n = A.shape[0]
    delta = 0.0
    for jj in range(len(idx)):
        j = idx[jj]
        bj = beta[j]
        rho = bj
        for i in range(n):
            rho += A[i, j] * r[i]
        bnew = _soft(rho, nlam)
        if bnew != bj:
            diff = bnew - bj
            for i in range(n):
                r[i] -= A[i, j] * diff
            beta[j] = bnew
            if abs(diff) > delta:
                delta = abs(diff)
    return delta


@njit(cache=True)
def _lasso_path(A, y, lams, order, tol, max_sweeps):
    # max_sweeps caps the total sweep count per lambda (full and active-set
    # sweeps both draw on the budget).
    n, d = A.shape
    L = len(lams)
    betas = np.zeros((L, d))
    beta = np.zeros(d)
    r = y.copy()
    for li in range(L):
        nlam = n * lams[li]
        budget = max_sweeps
        while budget > 0:
            delta = _lasso_sweep(A, r, beta, order, nlam)
            budget -= 1
            if delta < tol:
                break
            nact = 0
            for jj in range(d):
                if beta[order[jj]] != 0.0:
                    nact += 1
            active = np.empty(nact, dtype=np.int64)
            pos = 0
            for jj in range(d):
                if beta[order[jj]] != 0.0:
                    active[pos] = order[jj]
                    pos += 1
            while nact > 0 and budget > 0:
                budget -= 1
                if _lasso_sweep(A, r, beta, active, nlam) < tol:
                    break
        for j in range(d):
            betas[li, j] = beta[j]
    return betas


def lasso_cd_path(A, y, lams, order, tol=1e-7, max_sweeps=1000):
    return _lasso_path(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(lams, dtype=np.float64),
        np.ascontiguousarray(order, dtype=np.int64),
        tol,
        max_sweeps,
    )


# ---------------------------------------------------------------------------
# Logistic lasso via proximal Newton coordinate descent
# ---------------------------------------------------------------------------

@njit(cache=True)
def _logistic_sweep(A, w, r, beta, idx, nlam):
    n = A.shape[0]
    delta = 0.0
    for jj in range(len(idx)):
        j = idx[jj]
        bj = beta[j]
        denom = 0.0
        rho = 0.0
        for i in range(n):
            wa = w[i] * A[i, j]
            denom += wa * A[i, j]
            rho += wa * r[i]
        rho += denom * bj
        bnew = _soft(rho, nlam) / denom
        if bnew != bj:
            diff = bnew - bj
            for i in range(n):
                r[i] -= A[i, j] * diff
            beta[j] = bnew
            if abs(diff) > delta:
                delta = abs(diff)
    return delta


@njit(cache=True)
def _logistic_path(A, y, lams, order, tol, max_sweeps, outer_iters):
    # max_sweeps caps the total sweeps per lambda across Newton iterations.
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
            eta = np.empty(n)
            for i in range(n):
                acc = b0
                for j in range(d):
                    if beta[j] != 0.0:
                        acc += A[i, j] * beta[j]
                eta[i] = acc
            w = np.empty(n)
            r = np.empty(n)
            for i in range(n):
                p = 1.0 / (1.0 + np.exp(-eta[i]))
                wi = p * (1.0 - p)
                if wi < 1e-5:
                    wi = 1e-5
                w[i] = wi
                r[i] = (y[i] - p) / wi
            changed = 0.0
            while budget > 0:
                wsum = 0.0
                wr = 0.0
                for i in range(n):
                    wsum += w[i]
                    wr += w[i] * r[i]
                shift = wr / wsum
                delta = abs(shift)
                if shift != 0.0:
                    b0 += shift
                    for i in range(n):
                        r[i] -= shift
                sweep_delta = _logistic_sweep(A, w, r, beta, order, nlam)
                if sweep_delta > delta:
                    delta = sweep_delta
                budget -= 1
                if delta > changed:
                    changed = delta
                if delta < tol:
                    break
                nact = 0
                for jj in range(d):
                    if beta[order[jj]] != 0.0:
                        nact += 1
                active = np.empty(nact, dtype=np.int64)
                pos = 0
                for jj in range(d):
                    if beta[order[jj]] != 0.0:
                        active[pos] = order[jj]
                        pos += 1
                while nact > 0 and budget > 0:
                    budget -= 1
                    if _logistic_sweep(A, w, r, beta, active, nlam) < tol:
                        break
            if changed < 10 * tol or budget <= 0:
                break
        for j in range(d):
            betas[li, j] = beta[j]
        b0s[li] = b0
    return betas, b0s


def logistic_cd_path(A, y, lams, order, tol=1e-7, max_sweeps=1000, outer_iters=30):
    return _logistic_path(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(lams, dtype=np.float64),
        np.ascontiguousarray(order, dtype=np.int64),
        tol,
        max_sweeps,
        outer_iters,
    )


# ---------------------------------------------------------------------------
# Ising: checkerboard heat-bath sweeps and monotone CFTP
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sweep(spins, prob, key, base):
    side = spins.shape[0]
    for parity in range(2):
        for i in range(side):
            for j in range(side):
                if (i + j) % 2 != parity:
                    continue
                nb = 0
                if i > 0:
                    nb += spins[i - 1, j]
                if i < side - 1:
                    nb += spins[i + 1, j]
                if j > 0:
                    nb += spins[i, j - 1]
                if j < side - 1:
                    nb += spins[i, j + 1]
                u = _u01(key, base + np.uint64(i * side + j))
                if u < prob[i * side + j, nb + 4]:
                    spins[i, j] = 1
                else:
                    spins[i, j] = -1


@njit(cache=True)
def _gibbs(spins, prob, key, sweep_start, n_sweeps):
    side = spins.shape[0]
    nsites = np.uint64(side * side)
    for t in range(sweep_start, sweep_start + n_sweeps):
        _sweep(spins, prob, key, np.uint64(t) * nsites)
    return spins


def ising_gibbs_sweeps(spins, ptable, key, sweep_start, n_sweeps):
    return _gibbs(
        np.ascontiguousarray(spins, dtype=np.int8),
        np.ascontiguousarray(ptable, dtype=np.float64),
        np.uint64(key),
        sweep_start,
        n_sweeps,
    )


@njit(cache=True)
def _cftp(side, prob, key, max_epochs):
    nsites = np.uint64(side * side)
    T = 1
    top = np.ones((side, side), dtype=np.int8)
    for _ in range(max_epochs):
        top = np.ones((side, side), dtype=np.int8)
        bot = -np.ones((side, side), dtype=np.int8)
        for t in range(T, 0, -1):
            base = np.uint64(t - 1) * nsites
            _sweep(top, prob, key, base)
            _sweep(bot, prob, key, base)
        same = True
        for i in range(side):
            for j in range(side):
                if top[i, j] != bot[i, j]:
                    same = False
                    break
            if not same:
                break
        if same:
            return top, T
        T *= 2
    return top, -1


def ising_cftp(side, ptable, key, max_epochs=22):
    return _cftp(side, np.ascontiguousarray(ptable, dtype=np.float64), np.uint64(key), max_epochs)


# ---------------------------------------------------------------------------
# Metropolis-Hastings walk on three-way contingency tables
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pair(u0, u1, K):
    a = int(u0 * K)
    if a > K - 1:
        a = K - 1
    b = int(u1 * (K - 1))
    if b > K - 2:
        b = K - 2
    if b >= a:
        b += 1
    return a, b


@njit(cache=True)
def _mh_chain(table, key, t_max, t_start):
    K1, K2, K3 = table.shape
    if K1 < 2 or K2 < 2 or K3 < 2:
        return table
    seven = np.uint64(7)
    for t in range(t_start, t_start + t_max):
        base = np.uint64(t) * seven
        R1, R2 = _pair(_u01(key, base), _u01(key, base + np.uint64(1)), K1)
        C1, C2 = _pair(_u01(key, base + np.uint64(2)), _u01(key, base + np.uint64(3)), K3)
        D1, D2 = _pair(_u01(key, base + np.uint64(4)), _u01(key, base + np.uint64(5)), K2)
        dec1 = table[R1, D1, C1]
        dec2 = table[R1, D2, C2]
        dec3 = table[R2, D2, C1]
        dec4 = table[R2, D1, C2]
        if dec1 < 1 or dec2 < 1 or dec3 < 1 or dec4 < 1:
            continue
        inc1 = table[R1, D2, C1]
        inc2 = table[R1, D1, C2]
        inc3 = table[R2, D1, C1]
        inc4 = table[R2, D2, C2]
        alpha = (
            float(dec1) * dec2 * dec3 * dec4
            / ((inc1 + 1.0) * (inc2 + 1.0) * (inc3 + 1.0) * (inc4 + 1.0))
        )
        if _u01(key, base + np.uint64(6)) <= alpha:
            table[R1, D1, C1] -= 1
            table[R1, D2, C2] -= 1
            table[R2, D2, C1] -= 1
            table[R2, D1, C2] -= 1
            table[R1, D2, C1] += 1
            table[R1, D1, C2] += 1
            table[R2, D1, C1] += 1
            table[R2, D2, C2] += 1
    return table


def mh_table_chain(table, key, t_max, t_start=0):
    return _mh_chain(np.asarray(table, dtype=np.int64).copy(), np.uint64(key), t_max, t_start)


@njit(cache=True)
def _mh_many(table0, keys, t_max, t_start):
    nc = len(keys)
    K1, K2, K3 = table0.shape
    out = np.empty((nc, K1, K2, K3), dtype=np.int64)
    for c in range(nc):
        tab = table0.copy()
        _mh_chain(tab, keys[c], t_max, t_start)
        out[c] = tab
    return out


def mh_table_final_many(table0, keys, t_max, t_start=0):
    return _mh_many(
        np.asarray(table0, dtype=np.int64),
        np.asarray(keys, dtype=np.uint64),
        t_max,
        t_start,
    )
