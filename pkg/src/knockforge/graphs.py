"""Graph machinery for blocking-based knockoff constructions.

Vertices are 0-based integers; the edge-list file format (see matio) is
1-based.  Blocking sets make the deletion subgraph fall apart into pieces
small enough that the per-piece Gaussian constructions apply; global cut
sets isolate every free vertex for the discrete constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InvalidInputError, PreconditionError
from .rng import RngStream


class UndirectedGraph:
    """Immutable simple graph over vertices 0..p-1."""

    def __init__(self, p: int, edges):
        if p < 1:
            raise InvalidInputError("graph needs at least one vertex")
        canon = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise InvalidInputError(f"self-loop at vertex {a}")
            if not (0 <= a < p and 0 <= b < p):
                raise InvalidInputError(f"edge ({a},{b}) outside vertex range 0..{p-1}")
            canon.add((min(a, b), max(a, b)))
        self.p = p
        self.edges = frozenset(canon)
        adj = [[] for _ in range(p)]
        for a, b in sorted(canon):
            adj[a].append(b)
            adj[b].append(a)
        self.adjacency = tuple(tuple(sorted(x)) for x in adj)

    def neighbors(self, j: int) -> tuple[int, ...]:
        return self.adjacency[j]

    def degree(self, j: int) -> int:
        return len(self.adjacency[j])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def __repr__(self):
        return f"UndirectedGraph(p={self.p}, |E|={len(self.edges)})"


# ---------------------------------------------------------------------------
# Standard families
# ---------------------------------------------------------------------------

def ar_graph(p: int, r: int) -> UndirectedGraph:
    """Order-r chain: edges between vertices at distance <= r."""
    return UndirectedGraph(
        p, [(i, j) for i in range(p) for j in range(i + 1, min(i + r + 1, p))]
    )


def path_graph(p: int) -> UndirectedGraph:
    return ar_graph(p, 1)


def cycle_graph(p: int) -> UndirectedGraph:
    if p < 3:
        raise InvalidInputError("a cycle needs at least 3 vertices")
    return UndirectedGraph(p, [(i, (i + 1) % p) for i in range(p)])


def lattice_graph(dims: tuple[int, ...]) -> UndirectedGraph:
    """Finite box of Z^d with free boundary; vertex order is C-style
    (last coordinate fastest)."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise InvalidInputError("lattice dimensions must be positive")
    p = int(np.prod(dims))
    strides = np.cumprod((1,) + dims[::-1][:-1])[::-1]
    edges = []
    for v in range(p):
        coords = [(v // strides[k]) % dims[k] for k in range(len(dims))]
        for k in range(len(dims)):
            if coords[k] + 1 < dims[k]:
                edges.append((v, v + strides[k]))
    return UndirectedGraph(p, edges)


def tree_graph(parents) -> UndirectedGraph:
    """Tree from a parent array; exactly one root marked with parent -1."""
    parents = [int(x) for x in parents]
    p = len(parents)
    roots = [i for i, q in enumerate(parents) if q < 0]
    if len(roots) != 1:
        raise InvalidInputError("parent array must have exactly one root (-1)")
    edges = [(i, q) for i, q in enumerate(parents) if q >= 0]
    g = UndirectedGraph(p, edges)
    if len(components_after_deletion(g, set())) != 1:
        raise InvalidInputError("parent array does not describe a connected tree")
    return g


def empty_graph(p: int) -> UndirectedGraph:
    return UndirectedGraph(p, [])


def erdos_renyi(p: int, prob: float, rng: RngStream) -> UndirectedGraph:
    u = rng.uniform((p, p))
    edges = [(i, j) for i in range(p) for j in range(i + 1, p) if u[i, j] < prob]
    return UndirectedGraph(p, edges)


# ---------------------------------------------------------------------------
# Separation primitives
# ---------------------------------------------------------------------------

def components_after_deletion(G: UndirectedGraph, B) -> list[list[int]]:
    """Connected components of the subgraph induced by deleting B, each
    sorted, in order of smallest member."""
    B = set(B)
    seen = [False] * G.p
    comps = []
    for start in range(G.p):
        if seen[start] or start in B:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in G.adjacency[v]:
                if not seen[w] and w not in B:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def neighborhood_of_set(G: UndirectedGraph, V) -> set[int]:
    out = set()
    for v in V:
        out.update(G.adjacency[v])
    return out


def is_n_separated(G: UndirectedGraph, B, n: int) -> bool:
    """True iff every deletion component V has 2|V| + |I_V cap B| < n."""
    B = set(B)
    for comp in components_after_deletion(G, B):
        boundary = neighborhood_of_set(G, comp) & B
        if 2 * len(comp) + len(boundary) >= n:
            return False
    return True


def separation_violations(G: UndirectedGraph, B, n: int) -> list[tuple[list[int], int]]:
    """Components violating n-separation, with their 2|V|+|I_V cap B| values."""
    B = set(B)
    out = []
    for comp in components_after_deletion(G, B):
        boundary = neighborhood_of_set(G, comp) & B
        size = 2 * len(comp) + len(boundary)
        if size >= n:
            out.append((comp, size))
    return out


def is_global_cut_set(G: UndirectedGraph, B) -> bool:
    """True iff deleting B leaves only singleton components."""
    return all(len(c) == 1 for c in components_after_deletion(G, B))


# ---------------------------------------------------------------------------
# Greedy blocking search
# ---------------------------------------------------------------------------

def greedy_blocking(
    G: UndirectedGraph,
    pi=None,
    n_prime: int = 1,
    strategy: str = "order",
    rng: RngStream | None = None,
) -> set[int]:
    """Greedy search for a blocking set with budget n_prime.

    A visited vertex stays free iff n' >= 3 + |N_j| + |N_j^-|, where N_j is
    its extended neighborhood among the original vertices and N_j^- the
    previously freed part of it; free vertices merge their neighborhoods
    into unvisited ones.  With strategy="min_degree" the next vertex is the
    unvisited one of smallest expanded degree (ties broken by rng).
    Deterministic given (G, pi, n') under strategy="order".
    """
    if n_prime < 1:
        raise InvalidInputError("n_prime must be at least 1")
    p = G.p
    N = [set(G.adjacency[j]) for j in range(p)]
    B: set[int] = set()
    free: set[int] = set()
    visited: set[int] = set()

    def visit(j: int):
        nminus = len(N[j] & free)
        if n_prime >= 3 + len(N[j]) + nminus:
            merged = N[j]
            for k in merged - visited:
                if k != j:
                    N[k] |= merged - {k}
            free.add(j)
        else:
            B.add(j)
        visited.add(j)

    if strategy == "order":
        order = list(range(p)) if pi is None else [int(v) for v in pi]
        if sorted(order) != list(range(p)):
            raise InvalidInputError("pi must be a permutation of the vertices")
        for j in order:
            visit(j)
    elif strategy == "min_degree":
        tiebreak = rng.permutation(p) if rng is not None else np.arange(p)
        rank = np.empty(p, dtype=int)
        rank[tiebreak] = np.arange(p)
        remaining = set(range(p))
        while remaining:
            j = min(remaining, key=lambda v: (len(N[v]) + len(N[v] & free), rank[v]))
            remaining.discard(j)
            visit(j)
    else:
        raise InvalidInputError(f"unknown strategy {strategy!r}")
    return B


def greedy_blocking_literal(G: UndirectedGraph, pi=None, n_prime: int = 1) -> set[int]:
    """The expanding-graph form of the greedy search: free vertices get
    their neighborhood clique-completed and a twin vertex added.  Used as
    a cross-check for greedy_blocking, which bookkeeps the same expansion
    implicitly."""
    if n_prime < 1:
        raise InvalidInputError("n_prime must be at least 1")
    p = G.p
    order = list(range(p)) if pi is None else [int(v) for v in pi]
    adjbar: dict[int, set[int]] = {v: set(G.adjacency[v]) for v in range(p)}
    B: set[int] = set()
    for j in order:
        ibar = adjbar[j]
        if n_prime >= 3 + len(ibar):
            for a in ibar:
                adjbar[a] |= ibar - {a}
            twin = p + j
            adjbar[twin] = set(ibar)
            for a in ibar:
                adjbar[a].add(twin)
        else:
            B.add(j)
    return B


# ---------------------------------------------------------------------------
# Blocking plans
# ---------------------------------------------------------------------------

@dataclass
class BlockingPlan:
    """m blocking sets plus fold sizes for row-split constructions."""

    sets: list[frozenset[int]]
    n_prime: int
    fold_sizes: list[int] | None = None
    always_blocked: frozenset[int] = field(default_factory=frozenset)

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def covering(self) -> bool:
        return len(self.always_blocked) == 0

    def with_fold_sizes_for(self, n: int) -> "BlockingPlan":
        """Near-equal fold sizes summing to n."""
        m = self.m
        base = n // m
        sizes = [base + (1 if i < n - base * m else 0) for i in range(m)]
        return BlockingPlan(self.sets, self.n_prime, sizes, self.always_blocked)


def plan_coverage(p: int, sets) -> frozenset[int]:
    """Vertices blocked in every set (empty iff the plan covers [p])."""
    blocked = set(range(p))
    for B in sets:
        blocked &= set(B)
    return frozenset(blocked)


def randomized_blocking_plan(
    G: UndirectedGraph, m: int, n_prime: int, rng: RngStream
) -> BlockingPlan:
    """m greedy passes, each visiting vertices by descending count of prior
    blockings (ties shuffled by the stream).  A non-covering outcome is
    returned with the always-blocked vertices recorded, not raised, so the
    caller can rerun with a fresh stream."""
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    p = G.p
    eta = np.zeros(p, dtype=int)
    sets = []
    for i in range(m):
        perm = rng.derive("tie", i).permutation(p)
        pi = perm[np.argsort(-eta[perm], kind="stable")]
        B = greedy_blocking(G, pi, n_prime)
        eta[list(B)] += 1
        sets.append(frozenset(B))
    return BlockingPlan(
        sets=sets,
        n_prime=n_prime,
        always_blocked=frozenset(np.flatnonzero(eta == m).tolist()),
    )


def greedy_coloring(G: UndirectedGraph, order=None) -> np.ndarray:
    """Proper coloring with at most max_degree+1 colors."""
    order = list(range(G.p)) if order is None else [int(v) for v in order]
    colors = np.full(G.p, -1, dtype=int)
    for v in order:
        used = {colors[w] for w in G.adjacency[v] if colors[w] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    return colors


def coloring_plan(G: UndirectedGraph, colors, n_prime: int | None = None) -> BlockingPlan:
    """Blocking plan whose i-th free set is color class i."""
    colors = np.asarray(colors, dtype=int)
    m = int(colors.max()) + 1
    sets = [frozenset(np.flatnonzero(colors != c).tolist()) for c in range(m)]
    npr = n_prime if n_prime is not None else 3 + G.max_degree
    return BlockingPlan(sets=sets, n_prime=npr, always_blocked=plan_coverage(G.p, sets))


def standard_covering(family: str, n: int, **params) -> BlockingPlan:
    """Built-in coverings for the standard families, validated against
    their feasibility bounds.

    Families: ar_chain (p, r), lattice (dims), cycle (p), tree (parents),
    isolated (p).
    """
    if family == "ar_chain":
        p, r = int(params["p"]), int(params["r"])
        if r < 1:
            raise InvalidInputError("ar_chain requires r >= 1 (use isolated for r=0)")
        if n < 2 + 8 * r:
            raise InfeasibleError(f"ar_chain(r={r}) requires n >= 2+8r = {2 + 8 * r}, got n={n}")
        d = (n - 2) // 8
        blocks = np.arange(p) // d
        b1 = frozenset(np.flatnonzero(blocks % 2 == 1).tolist())
        b2 = frozenset(np.flatnonzero(blocks % 2 == 0).tolist())
        plan = BlockingPlan([b1, b2], n_prime=2 * d + 2 * r + 1).with_fold_sizes_for(n)
        G = ar_graph(p, r)
    elif family == "lattice":
        dims = tuple(params["dims"])
        d = len(dims)
        if n < 6 + 4 * d:
            raise InfeasibleError(f"lattice in {d} dimensions requires n >= 6+4d = {6 + 4 * d}, got n={n}")
        G = lattice_graph(dims)
        strides = np.cumprod((1,) + dims[::-1][:-1])[::-1]
        parity = np.zeros(G.p, dtype=int)
        for k in range(d):
            parity += (np.arange(G.p) // strides[k]) % dims[k]
        odd = frozenset(np.flatnonzero(parity % 2 == 1).tolist())
        even = frozenset(np.flatnonzero(parity % 2 == 0).tolist())
        plan = BlockingPlan([odd, even], n_prime=3 + 2 * d).with_fold_sizes_for(n)
    elif family == "cycle":
        p = int(params["p"])
        G = cycle_graph(p)
        if p % 2 == 0:
            if n < 10:
                raise InfeasibleError(f"even cycle requires n >= 10, got n={n}")
            colors = np.arange(p) % 2
        else:
            if n < 15:
                raise InfeasibleError(f"odd cycle requires n >= 15, got n={n}")
            colors = np.arange(p) % 2
            colors[p - 1] = 2
        m = int(colors.max()) + 1
        sets = [frozenset(np.flatnonzero(colors != c).tolist()) for c in range(m)]
        plan = BlockingPlan(sets, n_prime=5).with_fold_sizes_for(n)
    elif family == "tree":
        parents = params["parents"]
        G = tree_graph(parents)
        nchild = np.zeros(G.p, dtype=int)
        for i, q in enumerate(int(x) for x in parents):
            if q >= 0:
                nchild[q] += 1
        maxc = int(nchild.max())
        if n < 8 + 2 * maxc:
            raise InfeasibleError(
                f"tree with max {maxc} children requires n >= 8+2*max_children = {8 + 2 * maxc}, got n={n}"
            )
        depth = np.zeros(G.p, dtype=int)
        parents_arr = [int(x) for x in parents]
        root = parents_arr.index(-1)
        stack = [root]
        seen = {root}
        while stack:
            v = stack.pop()
            for w in G.adjacency[v]:
                if w not in seen:
                    depth[w] = depth[v] + 1
                    seen.add(w)
                    stack.append(w)
        odd = frozenset(np.flatnonzero(depth % 2 == 1).tolist())
        even = frozenset(np.flatnonzero(depth % 2 == 0).tolist())
        plan = BlockingPlan([odd, even], n_prime=4 + G.max_degree).with_fold_sizes_for(n)
    elif family == "isolated":
        p = int(params["p"])
        if n < 3:
            raise InfeasibleError(f"isolated graph requires n >= 3, got n={n}")
        G = empty_graph(p)
        plan = BlockingPlan([frozenset()], n_prime=3, fold_sizes=[n])
    else:
        raise InvalidInputError(f"unknown graph family {family!r}")

    for B, n_i in zip(plan.sets, plan.fold_sizes):
        if not is_n_separated(G, B, n_i):
            raise PreconditionError(
                f"standard covering for {family} failed its separation check at fold size {n_i}"
            )
    plan.always_blocked = plan_coverage(G.p, plan.sets)
    return plan
