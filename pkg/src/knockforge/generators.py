"""Data generators and response models for the simulation bench.

Nuisance randomness that stays fixed across replicates (Markov transition
tables, Ising fields, coefficient supports) is drawn from a dedicated
stream keyed by the experiment, never by the replicate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import accel
from .discrete import DiscreteMatrix
from .errors import InvalidInputError, ParameterError
from .graphs import UndirectedGraph, lattice_graph, path_graph
from .rng import RngStream


# ---------------------------------------------------------------------------
# Gaussian designs
# ---------------------------------------------------------------------------

def gen_gaussian_ar(n: int, p: int, rho: float, rng: RngStream) -> np.ndarray:
    """Rows iid N(0, Sigma) with Sigma_jk = rho^|j-k| via the chain
    factorization X_j = rho X_{j-1} + sqrt(1-rho^2) eps_j."""
    if not abs(rho) < 1:
        raise ParameterError("|rho| must be below 1")
    eps = rng.normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = eps[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * eps[:, j]
    return X


def ar_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def banded_precision(p: int, bandwidth: int, offdiag: float) -> np.ndarray:
    idx = np.arange(p)
    dist = np.abs(idx[:, None] - idx[None, :])
    omega = np.eye(p) - offdiag * ((dist >= 1) & (dist <= bandwidth))
    return omega


def banded_covariance(p: int, bandwidth: int, offdiag: float) -> tuple[np.ndarray, np.ndarray]:
    """(Sigma rescaled to unit diagonal, lower Cholesky factor of the
    precision); raises ParameterError if the precision is indefinite."""
    omega = banded_precision(p, bandwidth, offdiag)
    try:
        L = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise ParameterError(
            f"banded precision with bandwidth={bandwidth}, offdiag={offdiag} is not positive definite"
        ) from exc
    Linv = scipy.linalg.solve_triangular(L, np.eye(p), lower=True)
    sigma0 = Linv.T @ Linv
    d = np.sqrt(np.diag(sigma0))
    sigma = sigma0 / np.outer(d, d)
    np.fill_diagonal(sigma, 1.0)
    return sigma, L


def gen_gaussian_banded(n: int, p: int, bandwidth: int, offdiag: float, rng: RngStream) -> np.ndarray:
    """Exact sampling through the Cholesky factor of the banded precision,
    then column rescaling to unit variances."""
    omega = banded_precision(p, bandwidth, offdiag)
    try:
        L = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise ParameterError(
            f"banded precision with bandwidth={bandwidth}, offdiag={offdiag} is not positive definite"
        ) from exc
    Z = rng.normal((n, p))
    X0 = scipy.linalg.solve_triangular(L.T, Z.T, lower=False).T
    Linv = scipy.linalg.solve_triangular(L, np.eye(p), lower=True)
    d = np.sqrt((Linv ** 2).sum(axis=0))
    return X0 / d


# ---------------------------------------------------------------------------
# Discrete designs
# ---------------------------------------------------------------------------

@dataclass
class MarkovChainModel:
    """Inhomogeneous binary chain with transitions frozen at construction."""

    p: int
    q01: np.ndarray  # P(X_j = 1 | X_{j-1} = 0), length p-1
    q10: np.ndarray  # P(X_j = 0 | X_{j-1} = 1), length p-1

    @classmethod
    def draw(cls, p: int, stream: RngStream) -> "MarkovChainModel":
        U = stream.uniform((4, p - 1))
        q10 = U[0] / (0.4 + U[0] + U[1])
        q01 = U[2] / (0.4 + U[2] + U[3])
        return cls(p=p, q01=q01, q10=q10)

    def sample(self, n: int, rng: RngStream) -> DiscreteMatrix:
        u = rng.uniform((n, self.p))
        states = np.empty((n, self.p), dtype=np.int64)
        states[:, 0] = (u[:, 0] < 0.5).astype(np.int64)  # {0,1}
        for j in range(1, self.p):
            prev = states[:, j - 1]
            flip_to_one = (prev == 0) & (u[:, j] < self.q01[j - 1])
            stay_one = (prev == 1) & (u[:, j] >= self.q10[j - 1])
            states[:, j] = (flip_to_one | stay_one).astype(np.int64)
        return DiscreteMatrix(states + 1, (2,) * self.p)

    @property
    def graph(self) -> UndirectedGraph:
        return path_graph(self.p)

    @property
    def value_maps(self) -> list[dict]:
        return [{1: 0.0, 2: 1.0}] * self.p


def gen_markov_chain(n: int, p: int, rng: RngStream) -> tuple[DiscreteMatrix, MarkovChainModel]:
    """Draws frozen transition tables from rng's 'tables' child stream and
    samples n rows from the 'path' child."""
    model = MarkovChainModel.draw(p, rng.derive("tables"))
    return model.sample(n, rng.derive("path")), model


@dataclass
class IsingModel:
    """Ferromagnetic Ising field on a free-boundary square lattice."""

    side: int
    theta: float
    h: np.ndarray  # per-site external field, length side*side
    sampler: str = "gibbs"
    burn_in: int = 10_000
    thin: int = 100

    @classmethod
    def make(cls, side: int, theta: float, h=0.0, sampler: str = "gibbs",
             burn_in: int = 10_000, thin: int = 100) -> "IsingModel":
        if side < 2:
            raise ParameterError("side must be at least 2")
        if sampler not in ("gibbs", "cftp"):
            raise InvalidInputError(f"unknown sampler {sampler!r}")
        if sampler == "cftp" and side > 8:
            raise ParameterError("cftp sampling is restricted to side <= 8")
        harr = np.full(side * side, float(h)) if np.isscalar(h) else np.asarray(h, dtype=np.float64)
        if harr.shape != (side * side,):
            raise InvalidInputError("h must be a scalar or length side*side")
        return cls(side=side, theta=theta, h=harr, sampler=sampler, burn_in=burn_in, thin=thin)

    def _ptable(self) -> np.ndarray:
        nb = np.arange(-4, 5)
        return 1.0 / (1.0 + np.exp(-2.0 * (self.theta * nb[None, :] + self.h[:, None])))

    def sample(self, n: int, rng: RngStream) -> DiscreteMatrix:
        side = self.side
        pt = self._ptable()
        vals = np.empty((n, side * side), dtype=np.int64)
        if self.sampler == "cftp":
            for i in range(n):
                spins, T = accel.ising_cftp(side, pt, rng.derive("cftp", i).key)
                if T < 0:
                    raise ParameterError("cftp failed to coalesce; use the gibbs sampler")
                vals[i] = (spins.flatten(order="F") > 0) + 1
        else:
            key = rng.derive("gibbs").key
            init = rng.derive("init").uniform((side, side))
            spins = np.where(init < 0.5, 1, -1).astype(np.int8)
            spins = accel.ising_gibbs_sweeps(spins, pt, key, 0, self.burn_in)
            t0 = self.burn_in
            for i in range(n):
                spins = accel.ising_gibbs_sweeps(spins, pt, key, t0, self.thin)
                t0 += self.thin
                vals[i] = (spins.flatten(order="F") > 0) + 1
        return DiscreteMatrix(vals, (2,) * (side * side))

    @property
    def graph(self) -> UndirectedGraph:
        return lattice_graph((self.side, self.side))

    @property
    def value_maps(self) -> list[dict]:
        return [{1: -1.0, 2: 1.0}] * (self.side * self.side)


def gen_ising(n: int, side: int, theta: float, h, sampler: str, rng: RngStream,
              burn_in: int = 10_000, thin: int = 100) -> tuple[DiscreteMatrix, IsingModel]:
    model = IsingModel.make(side, theta, h, sampler, burn_in, thin)
    return model.sample(n, rng), model


# ---------------------------------------------------------------------------
# Responses and coefficients
# ---------------------------------------------------------------------------

def gen_response(X: np.ndarray, beta: np.ndarray, family: str, rng: RngStream) -> np.ndarray:
    """y | x ~ N(x'beta/sqrt(n), 1) or Bernoulli(sigmoid(x'beta/sqrt(n)))."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (X.shape[1],):
        raise InvalidInputError("beta length must match the column count")
    n = X.shape[0]
    eta = X @ beta / np.sqrt(n)
    if family == "linear_gaussian":
        return eta + rng.normal(n)
    if family == "logistic":
        prob = 1.0 / (1.0 + np.exp(-eta))
        return (rng.uniform(n) < prob).astype(np.float64)
    raise InvalidInputError(f"unknown response family {family!r}")


def gen_beta(
    p: int,
    k: int,
    amplitude: float,
    rng: RngStream,
    signs: str = "random",
    support: str = "uniform",
    support_range: tuple[int, int] | None = None,
    amplitude_dist: str = "constant",
    support_indices=None,
) -> np.ndarray:
    """k nonzero coefficients with +-amplitude entries (or amplitudes scaled
    by Unif(1,2) draws); the support is uniform, confined to a range, or
    supplied explicitly."""
    if k > p:
        raise InvalidInputError(f"k={k} exceeds p={p}")
    beta = np.zeros(p)
    if k == 0:
        return beta
    if support_indices is not None:
        idx = np.asarray(support_indices, dtype=int)
        if len(idx) != k:
            raise InvalidInputError("support_indices must have length k")
    elif support == "uniform":
        idx = rng.derive("support").choice_without_replacement(p, k)
    elif support == "range":
        lo, hi = support_range
        if hi - lo < k:
            raise InvalidInputError("support range too small for k nonzeros")
        idx = lo + rng.derive("support").choice_without_replacement(hi - lo, k)
    else:
        raise InvalidInputError(f"unknown support rule {support!r}")
    if signs == "random":
        sgn = np.where(rng.derive("signs").uniform(k) < 0.5, -1.0, 1.0)
    elif signs == "fixed":
        sgn = np.ones(k)
    else:
        raise InvalidInputError(f"unknown signs rule {signs!r}")
    if amplitude_dist == "constant":
        mag = np.full(k, amplitude)
    elif amplitude_dist == "unif_1_2":
        mag = amplitude * (1.0 + rng.derive("mag").uniform(k))
    else:
        raise InvalidInputError(f"unknown amplitude_dist {amplitude_dist!r}")
    beta[idx] = sgn * mag
    return beta


def discretize(X: np.ndarray, K: float) -> np.ndarray:
    """Rounds every entry to the nearest 1/K grid value."""
    if K <= 0:
        raise InvalidInputError("K must be positive")
    X = np.asarray(X, dtype=np.float64)
    return np.floor(X * K + 0.5) / K
