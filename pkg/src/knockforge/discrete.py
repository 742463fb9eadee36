"""Conditional knockoffs for discrete graphical models.

The blocked construction permutes each free column uniformly within the
row groups defined by its neighbors' observed patterns, which preserves
all neighborhood counts exactly.  Graph expanding reruns that step on an
augmented graph that includes the already-generated knockoff columns.
For Markov chains two refinements condition on the minimal pair-count
statistic: SCIP samples columns from exact conditionals fold by fold, and
the Metropolis-Hastings refinement resamples the three-way table of
(left, mid, right) before placing the column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .errors import (
    BudgetError,
    CoverageError,
    FoldSizeError,
    InvalidInputError,
    PreconditionError,
    StrategyError,
)
from .graphs import BlockingPlan, UndirectedGraph, is_global_cut_set, plan_coverage
from .results import KnockoffResult
from .rng import RngStream


@dataclass
class DiscreteMatrix:
    """Category-valued design matrix with 1-based consecutive labels."""

    values: np.ndarray  # (n, p) integer labels in 1..K_j
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 2:
            raise InvalidInputError("values must be a 2-d matrix")
        self.cardinalities = tuple(int(k) for k in self.cardinalities)
        if len(self.cardinalities) != self.values.shape[1]:
            raise InvalidInputError("one cardinality per column required")
        for j, K in enumerate(self.cardinalities):
            if K < 2:
                raise InvalidInputError(f"column {j} must have at least 2 categories")
            col = self.values[:, j]
            if col.min() < 1 or col.max() > K:
                raise InvalidInputError(
                    f"column {j} has labels outside 1..{K}"
                )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "DiscreteMatrix":
        return DiscreteMatrix(self.values[idx], self.cardinalities)

    def to_numeric(self, value_maps=None) -> np.ndarray:
        """Float view of the labels; value_maps[j] maps label -> numeric."""
        if value_maps is None:
            return self.values.astype(np.float64)
        out = np.empty(self.values.shape)
        for j, vmap in enumerate(value_maps):
            lut = np.asarray([vmap[k] for k in range(1, self.cardinalities[j] + 1)])
            out[:, j] = lut[self.values[:, j] - 1]
        return out


def ingest_labels(raw: np.ndarray) -> tuple[DiscreteMatrix, list[dict]]:
    """Remaps arbitrary integer labels to consecutive 1..K_j per column;
    returns the matrix and per-column {new_label: original} mappings."""
    raw = np.asarray(raw)
    n, p = raw.shape
    values = np.empty((n, p), dtype=np.int64)
    cards = []
    mappings = []
    for j in range(p):
        uniq, inv = np.unique(raw[:, j], return_inverse=True)
        values[:, j] = inv + 1
        cards.append(len(uniq))
        mappings.append({i + 1: uniq[i] for i in range(len(uniq))})
    return DiscreteMatrix(values, tuple(cards)), mappings


def neighborhood_counts(X: DiscreteMatrix, G: UndirectedGraph, j: int) -> dict:
    """Tally N_j(k_j, k_{I_j}) over observed neighbor patterns."""
    nbrs = list(G.adjacency[j])
    out: dict = {}
    for i in range(X.n):
        key = (int(X.values[i, j]), tuple(int(v) for v in X.values[i, nbrs]))
        out[key] = out.get(key, 0) + 1
    return out


def _pattern_groups(sub: np.ndarray) -> list[np.ndarray]:
    """Row groups by identical rows of sub, ordered by the sorted unique
    patterns (observed patterns only)."""
    if sub.shape[1] == 0:
        return [np.arange(sub.shape[0])]
    _, inverse = np.unique(sub, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    groups = []
    start = 0
    inv_sorted = inverse[order]
    for end in range(1, len(order) + 1):
        if end == len(order) or inv_sorted[end] != inv_sorted[start]:
            groups.append(order[start:end])
            start = end
    return groups


def _permute_within_groups(col: np.ndarray, groups: list[np.ndarray], stream: RngStream) -> np.ndarray:
    out = col.copy()
    for idx in groups:
        if len(idx) > 1:
            out[idx] = col[idx][stream.permutation(len(idx))]
    return out


# ---------------------------------------------------------------------------
# Blocked construction (uniform within-group permutations)
# ---------------------------------------------------------------------------

def dgm_blocked_knockoffs(
    X: DiscreteMatrix, G: UndirectedGraph, B, rng: RngStream
) -> KnockoffResult:
    """Permutes each free column uniformly within rows sharing its
    neighbors' pattern; blocked columns are copied."""
    if G.p != X.p:
        raise InvalidInputError("graph size does not match column count")
    B = set(int(b) for b in B)
    if not is_global_cut_set(G, B):
        raise PreconditionError("B is not a global cut set of G")
    x_tilde = X.values.copy()
    trivial = np.zeros(X.p, dtype=bool)
    trivial[sorted(B)] = True
    for j in range(X.p):
        if j in B:
            continue
        groups = _pattern_groups(X.values[:, list(G.adjacency[j])])
        x_tilde[:, j] = _permute_within_groups(
            X.values[:, j], groups, rng.derive("col", j)
        )
        trivial[j] = bool(np.array_equal(x_tilde[:, j], X.values[:, j]))
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={"method": "dgm_blocked", "blocked": sorted(B)},
    )


# ---------------------------------------------------------------------------
# Graph expanding
# ---------------------------------------------------------------------------

def _greedy_independent_set(adj: dict[int, set[int]], candidates, prefer=None, rng=None):
    """Maximal independent set among candidates, visited by (preference
    rank, degree, seeded tiebreak)."""
    cands = list(candidates)
    if not cands:
        return []
    pref_rank = {v: i for i, v in enumerate(prefer)} if prefer else {}
    if rng is not None:
        tie = {v: i for i, v in enumerate(rng.shuffle(np.asarray(cands)).tolist())}
    else:
        tie = {v: v for v in cands}
    cands.sort(key=lambda v: (pref_rank.get(v, len(pref_rank)), len(adj[v]), tie[v]))
    free: list[int] = []
    taken: set[int] = set()
    for v in cands:
        if not (adj[v] & taken):
            free.append(v)
            taken.add(v)
    return sorted(free)


def dgm_expanding_knockoffs(
    X: DiscreteMatrix,
    G: UndirectedGraph,
    Q_max: int,
    rng: RngStream,
    cut_strategy="greedy",
    first_round_block=None,
    prefer=None,
) -> KnockoffResult:
    """Iterated blocked construction on the expanding graph.

    Each round frees an independent set of the remaining original
    vertices (so everything else is a global cut set), generates their
    knockoffs conditional on all other columns, then adds twin vertices
    and clique-completes the freed neighborhoods.  Stops after Q_max
    rounds, when every vertex has a knockoff, or when a whole round came
    out trivial.
    """
    if Q_max < 1:
        raise InvalidInputError("Q_max must be at least 1")
    if G.p != X.p:
        raise InvalidInputError("graph size does not match column count")
    p = X.p
    adj: dict[int, set[int]] = {v: set(G.adjacency[v]) for v in range(p)}
    columns: dict[int, np.ndarray] = {v: X.values[:, v] for v in range(p)}
    done: set[int] = set()
    x_tilde = X.values.copy()
    trivial = np.ones(p, dtype=bool)
    rounds = 0
    stopped_early = False
    for q in range(Q_max):
        candidates = [v for v in range(p) if v not in done]
        if not candidates:
            break
        if q == 0 and first_round_block is not None:
            free = sorted(set(candidates) - set(int(b) for b in first_round_block))
            for a in free:
                for b in free:
                    if a < b and b in adj[a]:
                        raise StrategyError(
                            f"first-round blocking leaves adjacent free vertices {a},{b}"
                        )
        elif callable(cut_strategy):
            free = sorted(cut_strategy(adj, candidates, rng.derive("cut", q)))
            for a in free:
                if a in done or a >= p:
                    raise StrategyError(f"cut strategy freed invalid vertex {a}")
                for b in free:
                    if a < b and b in adj[a]:
                        raise StrategyError(
                            f"cut strategy freed adjacent vertices {a},{b}"
                        )
        elif cut_strategy == "greedy":
            free = _greedy_independent_set(
                adj, candidates, prefer=prefer, rng=rng.derive("cut", q)
            )
        else:
            raise StrategyError(f"unknown cut strategy {cut_strategy!r}")
        if not free:
            break
        rounds += 1
        all_trivial_round = True
        new_cols = {}
        for j in free:
            nbr_cols = [columns[v] for v in sorted(adj[j])]
            sub = (
                np.column_stack(nbr_cols) if nbr_cols else np.empty((X.n, 0), dtype=np.int64)
            )
            groups = _pattern_groups(sub)
            xt = _permute_within_groups(columns[j], groups, rng.derive("round", q, "col", j))
            new_cols[j] = xt
            x_tilde[:, j] = xt
            is_triv = bool(np.array_equal(xt, X.values[:, j]))
            trivial[j] = is_triv
            all_trivial_round &= is_triv
        # expand: twin vertices get the freed vertex's neighborhood, which
        # also becomes a clique
        for j in free:
            nbrs = set(adj[j])
            for a in nbrs:
                adj[a] |= nbrs - {a}
            twin = p + j
            adj[twin] = set(nbrs)
            for a in nbrs:
                adj[a].add(twin)
            columns[twin] = new_cols[j]
            done.add(j)
        if all_trivial_round:
            stopped_early = len(done) < p
            break
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={
            "method": "dgm_expanding",
            "rounds": rounds,
            "never_freed": sorted(set(range(p)) - done),
            "stopped_early": stopped_early,
        },
    )


# ---------------------------------------------------------------------------
# Data splitting
# ---------------------------------------------------------------------------

def dgm_split_knockoffs(
    X: DiscreteMatrix,
    G: UndirectedGraph,
    plan: BlockingPlan,
    rng: RngStream,
    inner: str = "plain",
    Q: int = 2,
    t_max: int | None = None,
    prefer_per_fold=None,
    shuffle_rows: bool = False,
) -> KnockoffResult:
    """Row-splits X and runs the inner discrete construction per fold:
    "plain" (blocked), "expanding" (graph expanding seeded with the fold's
    blocking set), or "refined" (MH three-way-table resampling; chain
    graphs only)."""
    n, p = X.n, X.p
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
            f"plan never frees vertices {sorted(uncovered)}"
        )
    for i, B in enumerate(plan.sets):
        if not is_global_cut_set(G, B):
            raise PreconditionError(f"fold {i} blocking set is not a global cut set")
    order = rng.derive("rows").permutation(n) if shuffle_rows else np.arange(n)
    x_tilde = np.empty_like(X.values)
    trivial = np.ones(p, dtype=bool)
    start = 0
    for i, sz in enumerate(plan.fold_sizes):
        rows = order[start : start + sz]
        start += sz
        Xf = X.rows(rows)
        stream = rng.derive("fold", i)
        if inner == "plain":
            res = dgm_blocked_knockoffs(Xf, G, plan.sets[i], stream)
        elif inner == "expanding":
            prefer = prefer_per_fold[i] if prefer_per_fold else None
            res = dgm_expanding_knockoffs(
                Xf, G, Q, stream, first_round_block=plan.sets[i], prefer=prefer
            )
        elif inner == "refined":
            res = _refined_chain_fold(Xf, G, plan.sets[i], stream, t_max)
        else:
            raise InvalidInputError(f"unknown inner construction {inner!r}")
        x_tilde[rows] = res.x_tilde
        trivial &= res.trivial
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={"method": f"dgm_split:{inner}", "m": plan.m},
    )


def chain_parity_plan(p: int) -> BlockingPlan:
    """Two folds for a chain: fold 1 blocks the odd 0-based vertices, fold 2
    the even ones."""
    odd = frozenset(range(1, p, 2))
    even = frozenset(range(0, p, 2))
    return BlockingPlan(sets=[odd, even], n_prime=5)


def chain_fourfold_plan(p: int) -> tuple[BlockingPlan, list[list[int]]]:
    """Four folds for a chain with graph expanding (Q=2): fold i first frees
    labels {i, i+2 mod 4}, then prefers label i+1 mod 4 in round two, so only
    label i+3 mod 4 stays trivial within the fold."""
    labels = np.arange(p) % 4
    sets = []
    prefer = []
    for i in range(4):
        blocked = np.flatnonzero((labels == (i + 1) % 4) | (labels == (i + 3) % 4))
        sets.append(frozenset(blocked.tolist()))
        prefer.append(np.flatnonzero(labels == (i + 1) % 4).tolist())
    plan = BlockingPlan(sets=sets, n_prime=5)
    return plan, prefer


# ---------------------------------------------------------------------------
# Markov chains: SCIP
# ---------------------------------------------------------------------------

def _pair_count_matrix(a: np.ndarray, b: np.ndarray, Ka: int, Kb: int) -> np.ndarray:
    return np.bincount((a - 1) * Kb + (b - 1), minlength=Ka * Kb).reshape(Ka, Kb)


def _multiset_permutations(counts: np.ndarray):
    """All distinct arrangements of the multiset {label k+1 with counts[k]}."""
    total = int(counts.sum())
    out = []
    arr = np.empty(total, dtype=np.int64)

    def rec(pos, remaining):
        if pos == total:
            out.append(arr.copy())
            return
        for k in range(len(remaining)):
            if remaining[k] > 0:
                remaining[k] -= 1
                arr[pos] = k + 1
                rec(pos + 1, remaining)
                remaining[k] += 1

    rec(0, counts.copy())
    return out


def _column_candidates(anchor: np.ndarray, Ka: int, target: np.ndarray) -> np.ndarray:
    """All columns W with pair counts (anchor, W) equal to target, found by
    arranging target's row-conditioned multisets within anchor's groups."""
    n = len(anchor)
    group_rows = [np.flatnonzero(anchor == k + 1) for k in range(Ka)]
    per_group = []
    for k in range(Ka):
        counts = target[k].astype(np.int64)
        if counts.sum() != len(group_rows[k]):
            return np.empty((0, n), dtype=np.int64)
        per_group.append(_multiset_permutations(counts))
    sizes = [len(g) for g in per_group]
    total = int(np.prod(sizes))
    out = np.empty((total, n), dtype=np.int64)
    reps = total
    for k in range(Ka):
        reps //= sizes[k]
        block = total // (reps * sizes[k])
        tile = np.repeat(np.arange(sizes[k]), reps)
        tile = np.tile(tile, block)
        stacked = np.stack(per_group[k])
        out[:, group_rows[k]] = stacked[tile]
    return out


def _pair_indicator(cands_a: np.ndarray, cands_b: np.ndarray, Ka: int, Kb: int, target: np.ndarray) -> np.ndarray:
    """indicator[a,b] = 1 iff pair counts of (cands_a[a], cands_b[b]) match."""
    onehot_a = (cands_a[:, :, None] == np.arange(1, Ka + 1)).astype(np.int64)
    onehot_b = (cands_b[:, :, None] == np.arange(1, Kb + 1)).astype(np.int64)
    counts = np.einsum("aik,bil->abkl", onehot_a, onehot_b)
    return np.all(counts == target, axis=(2, 3))


def mc_scip_knockoffs(
    X: DiscreteMatrix,
    fold_size: int,
    rng: RngStream,
    budget: float = 1e7,
) -> KnockoffResult:
    """Sequential conditional independent pairs for a discrete Markov chain,
    run independently on random row folds of about fold_size rows.

    Within a fold every pairwise transition-count matrix is preserved
    exactly; the enumeration guard rejects folds whose candidate space
    (K_j*K_{j+1})**fold_size would exceed the budget.
    """
    if X.p < 2:
        raise InvalidInputError("SCIP needs a chain of at least 2 columns")
    if fold_size < 1:
        raise InvalidInputError("fold_size must be positive")
    K = X.cardinalities
    worst = max(K[j] * K[j + 1] for j in range(X.p - 1))
    if worst ** min(fold_size, X.n) > budget:
        raise BudgetError(
            f"(K_j*K_j+1)^fold_size = {worst}^{min(fold_size, X.n)} exceeds budget "
            f"{budget:.0e}; reduce fold_size"
        )
    n = X.n
    perm = rng.derive("folds").permutation(n)
    x_tilde = np.empty_like(X.values)
    for f, start in enumerate(range(0, n, fold_size)):
        rows = perm[start : start + fold_size]
        x_tilde[rows] = _scip_fold(X.values[rows], K, rng.derive("fold", f))
    trivial = np.array(
        [bool(np.array_equal(x_tilde[:, j], X.values[:, j])) for j in range(X.p)]
    )
    return KnockoffResult(
        x_tilde=x_tilde,
        trivial=trivial,
        info={"method": "mc_scip", "fold_size": fold_size},
    )


def _scip_fold(vals: np.ndarray, K: tuple[int, ...], rng: RngStream) -> np.ndarray:
    n, p = vals.shape
    pairN = [None] + [
        _pair_count_matrix(vals[:, j - 1], vals[:, j], K[j - 1], K[j]) for j in range(1, p)
    ]
    # Candidate sets: C_0 anchored on the right neighbor, the rest on the
    # original left neighbor.
    cands = [None] * p
    cands[0] = _column_candidates(vals[:, 1], K[1], pairN[1].T).copy()
    for j in range(1, p):
        cands[j] = _column_candidates(vals[:, j - 1], K[j - 1], pairN[j])
    out = np.empty_like(vals)

    def right_ok(j):
        """1{pairs(C_j[b], X_{j+1}) = N[j+1]} for every candidate b."""
        if j + 1 >= p:
            return np.ones(len(cands[j]), dtype=bool)
        tgt = pairN[j + 1]
        return np.array(
            [
                np.array_equal(_pair_count_matrix(c, vals[:, j + 1], K[j], K[j + 1]), tgt)
                for c in cands[j]
            ]
        )

    def draw(stream, weights):
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if total <= 0:
            raise InvalidInputError("SCIP sampling hit an empty conditional")
        cdf = np.cumsum(w / total)
        u = stream.uniform()
        return int(np.searchsorted(cdf, u, side="right").clip(0, len(w) - 1))

    # Column 0: uniform over substitutions compatible with the untouched rest.
    idx0 = draw(rng.derive("col", 0), np.ones(len(cands[0])))
    out[:, 0] = cands[0][idx0]
    if p == 2:
        # F over C_1: membership only involves pairs(x_tilde_0, W_1).
        ind = _pair_indicator(out[:, 0][None, :], cands[1], K[0], K[1], pairN[1])[0]
        idx = draw(rng.derive("col", 1), ind.astype(np.float64))
        out[:, 1] = cands[1][idx]
        return out
    # F[b] = f_0(x_tilde_0, C_1[b]) up to a constant factor.
    ind0 = _pair_indicator(out[:, 0][None, :], cands[1], K[0], K[1], pairN[1])[0]
    F = ind0.astype(np.float64) * right_ok(1).astype(np.float64)
    for j in range(1, p - 1):
        Ipair = _pair_indicator(cands[j], cands[j + 1], K[j], K[j + 1], pairN[j + 1])
        # b* = the original column j+1, always a candidate of C_{j+1}
        bstar = int(
            np.flatnonzero(np.all(cands[j + 1] == vals[:, j + 1], axis=1))[0]
        )
        weights = Ipair[:, bstar] * F
        idx = draw(rng.derive("col", j), weights)
        out[:, j] = cands[j][idx]
        Z = Ipair.T.astype(np.float64) @ F
        with np.errstate(invalid="ignore", divide="ignore"):
            F = np.where((Z > 0) & right_ok(j + 1), Ipair[idx] * F[idx] / Z, 0.0)
    idxp = draw(rng.derive("col", p - 1), F)
    out[:, p - 1] = cands[p - 1][idxp]
    return out


# ---------------------------------------------------------------------------
# Markov chains: refined blocking by table resampling
# ---------------------------------------------------------------------------

def three_way_table(
    x_left: np.ndarray, x_mid: np.ndarray, x_right: np.ndarray, K1: int, K2: int, K3: int
) -> np.ndarray:
    code = ((x_left - 1) * K2 + (x_mid - 1)) * K3 + (x_right - 1)
    return np.bincount(code, minlength=K1 * K2 * K3).reshape(K1, K2, K3)


def default_t_max(table: np.ndarray) -> int:
    return 100 * max(1, int(np.count_nonzero(table)))


def mc_refined_blocking_column(
    x_left: np.ndarray,
    x_mid: np.ndarray,
    x_right: np.ndarray,
    t_max: int | None,
    rng: RngStream,
    cardinalities: tuple[int, int, int] | None = None,
) -> np.ndarray:
    """Knockoff for a chain column given its two neighbors.

    Runs a reversible random walk on three-way contingency tables (basic
    +-1 moves with all marginals zero, multinomial acceptance ratio), then
    places the column uniformly at random to match the sampled table.
    t_max=0 reduces to the plain within-group permutation.
    """
    x_left = np.asarray(x_left, dtype=np.int64)
    x_mid = np.asarray(x_mid, dtype=np.int64)
    x_right = np.asarray(x_right, dtype=np.int64)
    if cardinalities is None:
        K1, K2, K3 = int(x_left.max()), int(x_mid.max()), int(x_right.max())
    else:
        K1, K2, K3 = cardinalities
    if t_max is not None and t_max < 0:
        raise InvalidInputError("t_max must be nonnegative")
    table = three_way_table(x_left, x_mid, x_right, K1, K2, K3)
    steps = default_t_max(table) if t_max is None else int(t_max)
    if steps > 0 and min(K1, K2, K3) >= 2:
        table = accel.mh_table_chain(table, rng.derive("walk").key, steps)
    out = np.empty_like(x_mid)
    place = rng.derive("place")
    for k1 in range(K1):
        for k3 in range(K3):
            rows = np.flatnonzero((x_left == k1 + 1) & (x_right == k3 + 1))
            if len(rows) == 0:
                continue
            vals = np.repeat(np.arange(1, K2 + 1), table[k1, :, k3])
            out[rows] = vals[place.derive("cell", k1, k3).permutation(len(rows))]
    return out


def _refined_chain_fold(
    Xf: DiscreteMatrix, G: UndirectedGraph, B, stream: RngStream, t_max: int | None
) -> KnockoffResult:
    """Refined-blocking fold for a chain graph: interior free columns go
    through the table walk, end columns fall back to group permutation."""
    p = Xf.p
    ar_edges = {(j, j + 1) for j in range(p - 1)}
    if set((min(a, b), max(a, b)) for a, b in G.edges) != ar_edges:
        raise InvalidInputError("refined inner construction requires a chain graph")
    B = set(int(b) for b in B)
    if not is_global_cut_set(G, B):
        raise PreconditionError("B is not a global cut set of G")
    x_tilde = Xf.values.copy()
    trivial = np.zeros(p, dtype=bool)
    trivial[sorted(B)] = True
    K = Xf.cardinalities
    for j in range(p):
        if j in B:
            continue
        if 0 < j < p - 1:
            x_tilde[:, j] = mc_refined_blocking_column(
                Xf.values[:, j - 1],
                Xf.values[:, j],
                Xf.values[:, j + 1],
                t_max,
                stream.derive("col", j),
                cardinalities=(K[j - 1], K[j], K[j + 1]),
            )
        else:
            groups = _pattern_groups(Xf.values[:, list(G.adjacency[j])])
            x_tilde[:, j] = _permute_within_groups(
                Xf.values[:, j], groups, stream.derive("col", j)
            )
        trivial[j] = bool(np.array_equal(x_tilde[:, j], Xf.values[:, j]))
    return KnockoffResult(x_tilde=x_tilde, trivial=trivial, info={"method": "refined"})


def table_log_pmf(table: np.ndarray) -> float:
    """log Pr(table | margins), up to the normalizing constant: the product
    over (left,right) cells of multinomial coefficients."""
    out = 0.0
    K1, K2, K3 = table.shape
    for k1 in range(K1):
        for k3 in range(K3):
            M = int(table[k1, :, k3].sum())
            out += math.lgamma(M + 1)
            for k2 in range(K2):
                out -= math.lgamma(int(table[k1, k2, k3]) + 1)
    return out
