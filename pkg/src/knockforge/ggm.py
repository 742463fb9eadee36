"""Conditional knockoffs for Gaussian graphical models.

Blocking makes the deletion components conditionally independent given
the blocked columns, so each component gets partial low-dimensional
knockoffs conditional on its blocked boundary; data splitting runs that
construction per row-fold with different blocking sets so that no column
is trivial everywhere.
"""

from __future__ import annotations

import numpy as np

from . import gaussian
from .errors import CoverageError, FoldSizeError, InvalidInputError, PreconditionError
from .graphs import (
    BlockingPlan,
    UndirectedGraph,
    components_after_deletion,
    greedy_blocking,
    neighborhood_of_set,
    plan_coverage,
    separation_violations,
)
from .results import KnockoffResult, stack_folds
from .rng import RngStream


def ggm_blocked_knockoffs(
    X: np.ndarray,
    G: UndirectedGraph,
    B,
    rng: RngStream,
    s_method: str = "sdp",
    epsilon: float = gaussian.DEFAULT_EPSILON,
) -> KnockoffResult:
    """Per deletion component V, partial knockoffs conditional on the
    component's blocked boundary columns; blocked columns are copied and
    flagged trivial."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if G.p != p:
        raise InvalidInputError(f"graph has {G.p} vertices but X has {p} columns")
    B = sorted(set(int(b) for b in B))
    viols = separation_violations(G, B, n)
    if viols:
        comp, size = viols[0]
        raise PreconditionError(
            f"blocking set fails {n}-separation: component {comp} has "
            f"2|V|+|boundary| = {size} >= {n}"
        )
    x_tilde = X.copy()
    trivial = np.zeros(p, dtype=bool)
    trivial[B] = True
    comps = components_after_deletion(G, B)
    bset = set(B)
    for k, comp in enumerate(comps):
        boundary = sorted(neighborhood_of_set(G, comp) & bset)
        res = gaussian.partial_conditional_knockoffs(
            X[:, comp],
            X[:, boundary] if boundary else None,
            None,
            rng.derive("component", k),
            s_method=s_method,
            epsilon=epsilon,
        )
        x_tilde[:, comp] = res.x_tilde
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={"method": "ggm_blocked", "n_components": len(comps), "blocked": B},
    )


def ggm_split_knockoffs(
    X: np.ndarray,
    G: UndirectedGraph,
    plan: BlockingPlan,
    rng: RngStream,
    s_method: str = "sdp",
    epsilon: float = gaussian.DEFAULT_EPSILON,
    shuffle_rows: bool = False,
) -> KnockoffResult:
    """Row-splits X into the plan's folds and runs the blocked construction
    per fold; a column is trivial only if blocked in every fold."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if plan.fold_sizes is None:
        plan = plan.with_fold_sizes_for(n)
    if sum(plan.fold_sizes) != n:
        raise FoldSizeError(
            f"fold sizes {plan.fold_sizes} sum to {sum(plan.fold_sizes)}, need {n}"
        )
    if any(sz <= 0 for sz in plan.fold_sizes):
        raise FoldSizeError("fold sizes must be positive")
    uncovered = plan_coverage(p, plan.sets)
    if uncovered:
        raise CoverageError(
            f"plan never frees vertices {sorted(uncovered)}; rerun the blocking search"
        )
    if shuffle_rows:
        order = rng.derive("rows").permutation(n)
    else:
        order = np.arange(n)
    x_tilde = np.empty_like(X)
    trivial = np.ones(p, dtype=bool)
    start = 0
    fold_infos = []
    for i, sz in enumerate(plan.fold_sizes):
        rows = order[start : start + sz]
        start += sz
        res = ggm_blocked_knockoffs(
            X[rows], G, plan.sets[i], rng.derive("fold", i), s_method=s_method, epsilon=epsilon
        )
        x_tilde[rows] = res.x_tilde
        trivial &= res.trivial
        fold_infos.append(res.info)
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={"method": "ggm_split", "folds": fold_infos},
    )


def two_pass_chain_plan(G: UndirectedGraph, n_prime: int) -> BlockingPlan:
    """Deterministic two-pass blocking: first pass in identity order, second
    pass visiting the first pass's blocked set first (both sorted).  Works
    well for banded chains, where the second pass frees everything the
    first pass blocked."""
    b1 = greedy_blocking(G, None, n_prime)
    rest = [v for v in range(G.p) if v not in b1]
    b2 = greedy_blocking(G, sorted(b1) + rest, n_prime)
    sets = [frozenset(b1), frozenset(b2)]
    return BlockingPlan(sets=sets, n_prime=n_prime, always_blocked=plan_coverage(G.p, sets))


def original_knockoff_correlations(X: np.ndarray, x_tilde: np.ndarray) -> np.ndarray:
    """Per-column cosine similarity X_j'x_tilde_j / (|X_j||x_tilde_j|);
    equals 1 on columns blocked in every fold."""
    X = np.asarray(X, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    num = np.einsum("ij,ij->j", X, x_tilde)
    den = np.linalg.norm(X, axis=0) * np.linalg.norm(x_tilde, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / den, 1.0)
    return out
