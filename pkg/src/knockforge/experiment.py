"""Experiment runner: declarative configs, a replicate loop with derived
random streams, and CSV summaries.

Stream layout per run: the root stream is keyed by the seed; "nuisance"
children freeze experiment-level randomness (transition tables, fields,
coefficient supports) across replicates; "replicate",r children branch
into per-stage streams (X, beta, y, knockoffs, filter).  Everything a
replicate does is a pure function of (config, seed, r), so runs are
reproducible byte for byte and replicates can run in any order or
process.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import discrete as disc
from . import filters, gaussian, generators, ggm
from .errors import InvalidInputError, KnockforgeError, ReplicateFailureError
from .graphs import coloring_plan, greedy_coloring, path_graph
from .results import KnockoffResult
from .rng import RngStream

CSV_COLUMNS = (
    "replicate",
    "fdp",
    "power",
    "n_selected",
    "n_trivial_columns",
    "threshold",
    "lambda",
    "wall_ms",
)


@dataclass
class ExperimentConfig:
    name: str
    n: int
    p: int
    replicates: int
    seed: int
    generator: dict
    response: dict
    knockoffs: dict
    filter: dict = field(default_factory=dict)
    n_unlabeled: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        required = {"name", "n", "p", "replicates", "seed", "generator", "response", "knockoffs"}
        missing = required - set(d)
        if missing:
            raise InvalidInputError(f"config missing keys: {sorted(missing)}")
        unknown = set(d) - required - {"filter", "n_unlabeled", "threads"}
        if unknown:
            raise InvalidInputError(f"config has unknown keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self):
        if min(self.n, self.p, self.replicates) < 1:
            raise InvalidInputError("n, p, replicates must be positive")
        if self.n_unlabeled < 0:
            raise InvalidInputError("n_unlabeled must be nonnegative")
        fam = self.generator.get("family")
        if fam == "ising":
            side = int(self.generator["side"])
            if side * side != self.p:
                raise InvalidInputError(f"ising side={side} implies p={side*side}, config says {self.p}")
        k = int(self.response.get("k", 0))
        if k > self.p:
            raise InvalidInputError("response sparsity k exceeds p")
        q = float(self.filter.get("q", filters.DEFAULT_Q))
        if not 0 < q < 1:
            raise InvalidInputError("filter q must lie in (0,1)")


# ---------------------------------------------------------------------------
# Model wiring
# ---------------------------------------------------------------------------

class _Model:
    """Experiment-level covariate model with frozen nuisance parameters."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        g = config.generator
        self.family = g.get("family")
        nuisance = RngStream(config.seed).derive("nuisance")
        self.graph = None
        self.value_maps = None
        self.mu = None
        self.sigma = None
        self.chain = None
        self.ising = None
        if self.family == "gaussian_ar":
            self.rho = float(g.get("rho", 0.3))
            self.mu = np.zeros(config.p)
            self.sigma = generators.ar_covariance(config.p, self.rho)
            self.graph = path_graph(config.p)
        elif self.family == "gaussian_banded":
            bw = int(g.get("bandwidth", 10))
            off = float(g.get("offdiag", 0.05))
            self.bandwidth, self.offdiag = bw, off
            self.mu = np.zeros(config.p)
            self.sigma, _ = generators.banded_covariance(config.p, bw, off)
            from .graphs import ar_graph

            self.graph = ar_graph(config.p, bw)
        elif self.family == "markov_chain":
            self.chain = generators.MarkovChainModel.draw(config.p, nuisance.derive("tables"))
            self.graph = self.chain.graph
            self.value_maps = self.chain.value_maps
        elif self.family == "ising":
            h = g.get("h", 0.0)
            if h == "uniform":
                side = int(g["side"])
                h = nuisance.derive("fields").uniform(side * side)
            self.ising = generators.IsingModel.make(
                int(g["side"]),
                float(g.get("theta", 0.2)),
                h,
                g.get("sampler", "gibbs"),
                int(g.get("burn_in", 10_000)),
                int(g.get("thin", 100)),
            )
            self.graph = self.ising.graph
            self.value_maps = self.ising.value_maps
        else:
            raise InvalidInputError(f"unknown generator family {self.family!r}")
        resp = config.response
        k = int(resp.get("k", 0))
        self.support = np.sort(
            generators.gen_beta(
                config.p, k, 1.0, nuisance.derive("beta_support"),
                support=resp.get("support", "uniform"),
                support_range=tuple(resp["support_range"]) if "support_range" in resp else None,
            ).nonzero()[0]
        )

    @property
    def is_discrete(self) -> bool:
        return self.family in ("markov_chain", "ising")

    def sample(self, n: int, stream: RngStream):
        """Returns (numeric X, DiscreteMatrix or None)."""
        cfg = self.config
        if self.family == "gaussian_ar":
            return generators.gen_gaussian_ar(n, cfg.p, self.rho, stream), None
        if self.family == "gaussian_banded":
            return (
                generators.gen_gaussian_banded(n, cfg.p, self.bandwidth, self.offdiag, stream),
                None,
            )
        if self.family == "markov_chain":
            Xd = self.chain.sample(n, stream)
            return Xd.to_numeric(self.value_maps), Xd
        Xd = self.ising.sample(n, stream)
        return Xd.to_numeric(self.value_maps), Xd


def _discrete_plan(model: _Model, spec: dict):
    kind = spec.get("plan", "coloring")
    p = model.config.p
    if kind == "chain_parity":
        return disc.chain_parity_plan(p), None
    if kind == "fourfold":
        plan, prefer = disc.chain_fourfold_plan(p)
        return plan, prefer
    if kind == "coloring":
        colors = greedy_coloring(model.graph)
        return coloring_plan(model.graph, colors), None
    raise InvalidInputError(f"unknown discrete plan {kind!r}")


def _make_knockoffs(model: _Model, X, Xd, Xu, Xud, stream: RngStream) -> KnockoffResult:
    cfg = model.config
    spec = cfg.knockoffs
    method = spec.get("method")
    s_method = spec.get("s_method", "sdp")
    epsilon = float(spec.get("epsilon", gaussian.DEFAULT_EPSILON))
    if method == "gaussian_low_dim":
        return filters.knockoffs_with_unlabeled(
            X, Xu, lambda M: gaussian.gaussian_conditional_knockoffs(
                M, None, stream.derive("gen"), s_method=s_method, epsilon=epsilon
            )
        )
    if method == "gaussian_known_mean":
        mu = np.asarray(spec.get("mu", np.zeros(cfg.p)), dtype=np.float64)
        return filters.knockoffs_with_unlabeled(
            X, Xu, lambda M: gaussian.gaussian_conditional_knockoffs_known_mean(
                M, mu, None, stream.derive("gen"), s_method=s_method, epsilon=epsilon
            )
        )
    if method == "unconditional_gaussian":
        if model.sigma is None:
            raise InvalidInputError("unconditional_gaussian needs a Gaussian generator")
        s = gaussian.make_s_vector(model.sigma, s_method, epsilon)
        return filters.unconditional_gaussian_knockoffs(
            X, model.mu, model.sigma, s, stream.derive("gen")
        )
    if method == "ggm_blocked":
        B = spec.get("B")
        if B is None:
            from .graphs import greedy_blocking

            B = greedy_blocking(model.graph, None, int(spec.get("n_prime", cfg.n)))
        return ggm.ggm_blocked_knockoffs(
            X, model.graph, B, stream.derive("gen"), s_method=s_method, epsilon=epsilon
        )
    if method == "ggm_split":
        n_prime = int(spec.get("n_prime", cfg.n // int(spec.get("m", 2))))
        if spec.get("plan", "two_pass") == "two_pass":
            plan = ggm.two_pass_chain_plan(model.graph, n_prime)
        else:
            from .graphs import randomized_blocking_plan

            plan = randomized_blocking_plan(
                model.graph, int(spec.get("m", 2)), n_prime, stream.derive("plan")
            )
        return ggm.ggm_split_knockoffs(
            X,
            model.graph,
            plan.with_fold_sizes_for(X.shape[0]),
            stream.derive("gen"),
            s_method=s_method,
            epsilon=epsilon,
        )
    # Discrete methods operate on label matrices (with unlabeled rows stacked).
    if Xd is None:
        raise InvalidInputError(f"method {method!r} needs a discrete generator")
    n = Xd.n
    if Xud is not None:
        full = disc.DiscreteMatrix(
            np.concatenate([Xd.values, Xud.values], axis=0), Xd.cardinalities
        )
    else:
        full = Xd
    if method == "dgm_blocked":
        plan, _ = _discrete_plan(model, spec)
        res = disc.dgm_blocked_knockoffs(full, model.graph, plan.sets[0], stream.derive("gen"))
    elif method == "dgm_split":
        plan, prefer = _discrete_plan(model, spec)
        res = disc.dgm_split_knockoffs(
            full,
            model.graph,
            plan.with_fold_sizes_for(full.n),
            stream.derive("gen"),
            inner=spec.get("inner", "plain"),
            Q=int(spec.get("Q", 2)),
            t_max=spec.get("t_max"),
            prefer_per_fold=prefer,
        )
    elif method == "dgm_expanding":
        res = disc.dgm_expanding_knockoffs(
            full, model.graph, int(spec.get("Q", 2)), stream.derive("gen")
        )
    elif method == "mc_scip":
        res = disc.mc_scip_knockoffs(full, int(spec.get("fold_size", 8)), stream.derive("gen"))
    else:
        raise InvalidInputError(f"unknown knockoff method {method!r}")
    xt_labels = res.x_tilde[:n]
    xt_num = disc.DiscreteMatrix(xt_labels, Xd.cardinalities).to_numeric(model.value_maps)
    trivial = np.array(
        [bool(np.array_equal(xt_labels[:, j], Xd.values[:, j])) for j in range(Xd.p)]
    )
    return KnockoffResult(x_tilde=xt_num, trivial=trivial, info=res.info)


_MODEL_CACHE: dict[str, _Model] = {}


def _get_model(config_json: str) -> _Model:
    model = _MODEL_CACHE.get(config_json)
    if model is None:
        model = _Model(ExperimentConfig.from_dict(json.loads(config_json)))
        _MODEL_CACHE[config_json] = model
    return model


def run_replicate(config_json: str, r: int, timing: bool = False) -> dict:
    """One replicate: generate, knock off, filter, score."""
    t0 = time.perf_counter()
    model = _get_model(config_json)
    cfg = model.config
    rep = RngStream(cfg.seed).derive("replicate", r)
    X, Xd = model.sample(cfg.n, rep.derive("X"))
    Xu = Xud = None
    if cfg.n_unlabeled > 0:
        Xu, Xud = model.sample(cfg.n_unlabeled, rep.derive("Xu"))
    resp = cfg.response
    k = len(model.support)
    beta = generators.gen_beta(
        cfg.p,
        k,
        float(resp.get("amplitude", 1.0)),
        rep.derive("beta"),
        signs=resp.get("signs", "random"),
        amplitude_dist=resp.get("amplitude_dist", "constant"),
        support_indices=model.support,
    )
    y = generators.gen_response(X, beta, resp.get("family", "linear_gaussian"), rep.derive("y"))
    ko = _make_knockoffs(model, X, Xd, Xu, Xud, rep.derive("knockoffs"))
    fspec = cfg.filter
    family = "logistic" if resp.get("family") == "logistic" else "linear"
    W = filters.lcd_statistics(
        X,
        ko.x_tilde,
        y,
        rep.derive("filter"),
        family=family,
        folds=int(fspec.get("cv_folds", filters.DEFAULT_FOLDS)),
        n_lambda=int(fspec.get("n_lambda", filters.DEFAULT_N_LAMBDA)),
    )
    sel = filters.knockoff_threshold(
        W, float(fspec.get("q", filters.DEFAULT_Q)), bool(fspec.get("plus", True))
    )
    fdp, power = filters.fdp_and_power(sel.selected, model.support, cfg.p)
    wall = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
    return {
        "replicate": r,
        "fdp": fdp,
        "power": power,
        "n_selected": len(sel.selected),
        "n_trivial_columns": ko.n_trivial,
        "threshold": sel.threshold,
        "lambda": W.lambda_selected,
        "wall_ms": wall,
    }


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "nan"
    x = float(v)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf"
    return f"{x:.10g}"


def rows_to_csv(rows: list[dict], aggregate: dict | None) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in CSV_COLUMNS))
    if aggregate:
        for label in ("mean", "se"):
            vals = aggregate[label]
            lines.append(
                ",".join([label] + [_fmt(vals.get(c)) for c in CSV_COLUMNS[1:]])
            )
    return "\n".join(lines) + "\n"


def aggregate_rows(rows: list[dict]) -> dict:
    good = [r for r in rows if r.get("fdp") is not None and not np.isnan(r["fdp"])]
    if not good:
        return {"mean": {}, "se": {}}
    out = {"mean": {}, "se": {}}
    R = len(good)
    for col in ("fdp", "power", "n_selected", "n_trivial_columns", "wall_ms"):
        vals = np.array([float(r[col]) for r in good])
        out["mean"][col] = vals.mean()
        out["se"][col] = vals.std(ddof=1) / np.sqrt(R) if R > 1 else 0.0
    finite_thr = np.array(
        [r["threshold"] for r in good if np.isfinite(r["threshold"])]
    )
    out["mean"]["threshold"] = finite_thr.mean() if len(finite_thr) else np.inf
    out["mean"]["lambda"] = np.mean([r["lambda"] for r in good])
    return out


def resolve_threads(cli_threads: int | None, config_threads: int) -> int:
    env = os.environ.get("KNOCKFORGE_THREADS")
    if env is not None:
        return max(1, int(env))
    if cli_threads is not None:
        return max(1, cli_threads)
    return max(1, config_threads)


def run_experiment(
    config: ExperimentConfig,
    out_path=None,
    threads: int | None = None,
    timing: bool = False,
    replicates: int | None = None,
    max_failure_fraction: float = 0.05,
) -> tuple[list[dict], dict]:
    """Runs the replicate loop, writes the per-replicate CSV plus aggregate
    rows, and raises ReplicateFailureError when more than 5% of replicates
    errored (the CSV is still written first)."""
    R = replicates if replicates is not None else config.replicates
    nthreads = resolve_threads(threads, config.threads)
    config_json = json.dumps(asdict(config), sort_keys=True)
    rows: list[dict] = []
    failures: list[tuple[int, str]] = []

    def on_result(r, res, err):
        if err is not None:
            failures.append((r, err))
            rows.append({"replicate": r, "wall_ms": 0.0})
        else:
            rows.append(res)

    if nthreads > 1 and R > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=nthreads) as pool:
            futs = {pool.submit(run_replicate, config_json, r, timing): r for r in range(1, R + 1)}
            for fut in concurrent.futures.as_completed(futs):
                r = futs[fut]
                try:
                    on_result(r, fut.result(), None)
                except KnockforgeError as exc:
                    on_result(r, None, str(exc))
    else:
        for r in range(1, R + 1):
            try:
                on_result(r, run_replicate(config_json, r, timing), None)
            except KnockforgeError as exc:
                on_result(r, None, str(exc))
    rows.sort(key=lambda row: row["replicate"])
    agg = aggregate_rows(rows)
    csv_text = rows_to_csv(rows, agg)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(csv_text)
    if len(failures) > max_failure_fraction * R:
        raise ReplicateFailureError(
            f"{len(failures)}/{R} replicates failed; first: {failures[0][1]}"
        )
    return rows, agg


# ---------------------------------------------------------------------------
# Presets: the paper-scale simulation designs plus desk-scale variants
# ---------------------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "fig1_ldg": {
        "name": "fig1_ldg",
        "n": 2500,
        "p": 1000,
        "replicates": 200,
        "seed": 20240801,
        "generator": {"family": "gaussian_ar", "rho": 0.3},
        "response": {"family": "linear_gaussian", "amplitude": 3.5, "k": 60},
        "knockoffs": {"method": "gaussian_low_dim", "s_method": "sdp"},
        "filter": {"q": 0.2, "plus": True},
    },
    "fig2_ar1": {
        "name": "fig2_ar1",
        "n": 300,
        "p": 2000,
        "replicates": 200,
        "seed": 20240802,
        "generator": {"family": "gaussian_ar", "rho": 0.3},
        "response": {"family": "linear_gaussian", "amplitude": 3.5, "k": 60},
        "knockoffs": {"method": "ggm_split", "m": 2, "n_prime": 40, "plan": "two_pass"},
        "filter": {"q": 0.2, "plus": True},
    },
    "fig2_ar10": {
        "name": "fig2_ar10",
        "n": 500,
        "p": 2000,
        "replicates": 200,
        "seed": 20240803,
        "generator": {"family": "gaussian_banded", "bandwidth": 10, "offdiag": 0.05},
        "response": {"family": "linear_gaussian", "amplitude": 3.5, "k": 60},
        "knockoffs": {"method": "ggm_split", "m": 2, "n_prime": 50, "plan": "two_pass"},
        "filter": {"q": 0.2, "plus": True},
    },
    "fig4_chain": {
        "name": "fig4_chain",
        "n": 300,
        "p": 1000,
        "replicates": 200,
        "seed": 20240804,
        "generator": {"family": "markov_chain"},
        "response": {"family": "linear_gaussian", "amplitude": 7.0, "k": 60},
        "knockoffs": {"method": "dgm_split", "plan": "chain_parity", "inner": "expanding", "Q": 2},
        "filter": {"q": 0.2, "plus": True},
    },
    "fig4_ising": {
        "name": "fig4_ising",
        "n": 250,
        "p": 1024,
        "replicates": 200,
        "seed": 20240805,
        "generator": {"family": "ising", "side": 32, "theta": 0.2, "h": 0.0, "sampler": "gibbs"},
        "response": {"family": "linear_gaussian", "amplitude": 4.0, "k": 60},
        "knockoffs": {"method": "dgm_split", "plan": "coloring"},
        "filter": {"q": 0.2, "plus": True},
    },
    "desk_ldg": {
        "name": "desk_ldg",
        "n": 150,
        "p": 50,
        "replicates": 200,
        "seed": 11,
        "generator": {"family": "gaussian_ar", "rho": 0.3},
        "response": {"family": "linear_gaussian", "amplitude": 3.5, "k": 10},
        "knockoffs": {"method": "gaussian_low_dim"},
        "filter": {"q": 0.2, "plus": True},
    },
    "desk_chain": {
        "name": "desk_chain",
        "n": 120,
        "p": 100,
        "replicates": 200,
        "seed": 12,
        "generator": {"family": "markov_chain"},
        "response": {"family": "linear_gaussian", "amplitude": 7.0, "k": 10},
        "knockoffs": {"method": "dgm_split", "plan": "chain_parity"},
        "filter": {"q": 0.2, "plus": True},
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise InvalidInputError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(json.loads(json.dumps(PRESETS[name])))
