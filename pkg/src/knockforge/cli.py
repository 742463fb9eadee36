"""Command-line interface.

Subcommands: run (experiment configs), gen (data generators), block
(graph/blocking tools), filter (W statistics + selection on saved
matrices).  Exit codes: 0 success, 2 precondition or input error,
3 too many failed replicates.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import filters, matio
from .errors import KnockforgeError, ReplicateFailureError
from .experiment import PRESETS, ExperimentConfig, preset, run_experiment
from .graphs import (
    ar_graph,
    cycle_graph,
    empty_graph,
    greedy_blocking,
    is_global_cut_set,
    is_n_separated,
    lattice_graph,
    randomized_blocking_plan,
    standard_covering,
)
from .rng import RngStream


def _family_graph(args):
    if args.family == "ar_chain":
        return ar_graph(args.p, args.r)
    if args.family == "cycle":
        return cycle_graph(args.p)
    if args.family == "lattice":
        return lattice_graph(tuple(args.dims))
    if args.family == "isolated":
        return empty_graph(args.p)
    raise KnockforgeError(f"unknown graph family {args.family!r}")


def _cmd_run(args) -> int:
    if args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    replicates = args.replicates
    try:
        rows, agg = run_experiment(
            cfg,
            out_path=args.out,
            threads=args.threads,
            timing=args.timing,
            replicates=replicates,
        )
    except ReplicateFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    mean = agg.get("mean", {})
    se = agg.get("se", {})
    print(
        f"{cfg.name}: R={replicates or cfg.replicates} "
        f"FDR={mean.get('fdp', float('nan')):.4f} (se {se.get('fdp', 0):.4f}) "
        f"power={mean.get('power', float('nan')):.4f} (se {se.get('power', 0):.4f})"
    )
    if args.out:
        print(f"wrote {args.out}")
    return 0


def _cmd_gen(args) -> int:
    from . import generators

    rng = RngStream(args.seed)
    discrete = None
    if args.kind == "ar1":
        X = generators.gen_gaussian_ar(args.n, args.p, args.rho, rng)
    elif args.kind == "banded":
        X = generators.gen_gaussian_banded(args.n, args.p, args.bandwidth, args.offdiag, rng)
    elif args.kind == "markov-chain":
        discrete, _ = generators.gen_markov_chain(args.n, args.p, rng)
    elif args.kind == "ising":
        discrete, _ = generators.gen_ising(
            args.n, args.side, args.theta, 0.0, args.sampler, rng
        )
    else:
        raise KnockforgeError(f"unknown generator {args.kind!r}")
    if discrete is not None:
        matio.write_discrete_csv(args.out, discrete)
    elif args.format == "binary":
        matio.write_matrix_binary(args.out, X)
    else:
        matio.write_matrix_csv(args.out, X, header=args.header)
    print(f"wrote {args.out}")
    return 0


def _cmd_block(args) -> int:
    if args.covering:
        params = {}
        if args.family == "ar_chain":
            params = {"p": args.p, "r": args.r}
        elif args.family == "lattice":
            params = {"dims": tuple(args.dims)}
        elif args.family in ("cycle", "isolated"):
            params = {"p": args.p}
        plan = standard_covering(args.family, args.n, **params)
        for i, B in enumerate(plan.sets):
            print(f"B{i+1}: " + " ".join(str(v + 1) for v in sorted(B)))
        print(f"fold_sizes: {plan.fold_sizes}  n_prime: {plan.n_prime}")
        return 0
    G = matio.read_graph(args.graph) if args.graph else _family_graph(args)
    if args.m > 1:
        plan = randomized_blocking_plan(G, args.m, args.n_prime, RngStream(args.seed))
        for i, B in enumerate(plan.sets):
            print(f"B{i+1}: " + " ".join(str(v + 1) for v in sorted(B)))
        if not plan.covering:
            print(
                "warning: non-covering plan; always blocked: "
                + " ".join(str(v + 1) for v in sorted(plan.always_blocked)),
                file=sys.stderr,
            )
    else:
        B = greedy_blocking(G, None, args.n_prime)
        print("B: " + " ".join(str(v + 1) for v in sorted(B)))
        print(f"n'-separated: {is_n_separated(G, B, args.n_prime)}")
        print(f"global cut set: {is_global_cut_set(G, B)}")
    return 0


def _cmd_filter(args) -> int:
    X = matio.read_matrix_csv(args.x, header=args.header)
    Xt = matio.read_matrix_csv(args.xtilde, header=args.header)
    y = matio.read_matrix_csv(args.y, header=args.header).ravel()
    W = filters.lcd_statistics(
        X, Xt, y, RngStream(args.seed), family=args.family, n_lambda=args.n_lambda
    )
    sel = filters.knockoff_threshold(W, args.q, plus=not args.no_plus)
    print("W: " + " ".join(f"{v:.6g}" for v in W.w))
    print(f"threshold: {sel.threshold:.6g}" if np.isfinite(sel.threshold) else "threshold: inf")
    print("selected: " + " ".join(str(j + 1) for j in sel.selected))
    if args.out:
        matio.write_matrix_csv(args.out, W.w.reshape(-1, 1))
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="knockforge", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run an experiment config (JSON)")
    runp.add_argument("config", nargs="?", help="config file path")
    runp.add_argument("--preset", choices=sorted(PRESETS), help="use a shipped preset")
    runp.add_argument("--seed", type=int)
    runp.add_argument("--replicates", type=int)
    runp.add_argument("--out", help="CSV output path")
    runp.add_argument("--threads", type=int, default=None)
    runp.add_argument("--timing", action="store_true", help="record real wall times (breaks byte-reproducibility)")
    runp.set_defaults(func=_cmd_run)

    genp = sub.add_parser("gen", help="generate a data set")
    genp.add_argument("kind", choices=["ar1", "banded", "markov-chain", "ising"])
    genp.add_argument("--n", type=int, required=True)
    genp.add_argument("--p", type=int, default=0)
    genp.add_argument("--rho", type=float, default=0.3)
    genp.add_argument("--bandwidth", type=int, default=10)
    genp.add_argument("--offdiag", type=float, default=0.05)
    genp.add_argument("--side", type=int, default=8)
    genp.add_argument("--theta", type=float, default=0.2)
    genp.add_argument("--sampler", default="gibbs", choices=["gibbs", "cftp"])
    genp.add_argument("--seed", type=int, default=0)
    genp.add_argument("--out", required=True)
    genp.add_argument("--format", default="csv", choices=["csv", "binary"])
    genp.add_argument("--header", action="store_true")
    genp.set_defaults(func=_cmd_gen)

    blockp = sub.add_parser("block", help="blocking-set tools")
    blockp.add_argument("--graph", help="edge-list file ('p <count>' header, 1-indexed)")
    blockp.add_argument("--family", choices=["ar_chain", "cycle", "lattice", "isolated", "tree"])
    blockp.add_argument("--p", type=int, default=0)
    blockp.add_argument("--r", type=int, default=1)
    blockp.add_argument("--dims", type=int, nargs="+", default=[4, 4])
    blockp.add_argument("--n-prime", type=int, default=10)
    blockp.add_argument("--m", type=int, default=1, help="number of randomized passes")
    blockp.add_argument("--covering", action="store_true", help="use the built-in family covering")
    blockp.add_argument("--n", type=int, default=0, help="sample size for --covering")
    blockp.add_argument("--seed", type=int, default=0)
    blockp.set_defaults(func=_cmd_block)

    filtp = sub.add_parser("filter", help="LCD statistics + knockoff selection")
    filtp.add_argument("--x", required=True)
    filtp.add_argument("--xtilde", required=True)
    filtp.add_argument("--y", required=True)
    filtp.add_argument("--q", type=float, default=0.2)
    filtp.add_argument("--no-plus", action="store_true", help="use T0 instead of T+")
    filtp.add_argument("--family", default="linear", choices=["linear", "logistic"])
    filtp.add_argument("--n-lambda", type=int, default=filters.DEFAULT_N_LAMBDA)
    filtp.add_argument("--seed", type=int, default=0)
    filtp.add_argument("--header", action="store_true")
    filtp.add_argument("--out")
    filtp.set_defaults(func=_cmd_filter)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ReplicateFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KnockforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
