"""Command-line interface: solve one instance or run the benchmark grid.

Exit codes: 0 on success, 1 on input errors, 2 when a time or node limit
stopped the run before the requested gap.  Bounds are printed either way.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import sbc
from .dd import Box
from .regress import (
    BUDGET_FORM,
    PENALTY_FORM,
    Dataset,
    load_csv,
    make_problem,
    synth,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddscale",
        description="Globally solve penalized least-squares problems "
                    "(SCAD, MCP, l0, lp) with certified bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="solve one instance")
    _add_instance_args(solve_p)
    _add_penalty_args(solve_p)
    _add_solver_args(solve_p)
    solve_p.add_argument("--json", metavar="PATH",
                         help="also write the report as one JSON line")
    solve_p.add_argument("--name", default=None, help="instance label")

    bench_p = sub.add_parser(
        "bench",
        help="run an instance list at (lam, gamma) in {(1,3), (10,30)}",
    )
    bench_p.add_argument(
        "--dataset", action="append", default=[], metavar="NAME=PATH:RESPONSE",
        help="CSV instance; repeatable",
    )
    bench_p.add_argument(
        "--synthetic", action="append", default=[],
        metavar="seed=S,n=N,p=P[,sparsity=K,noise=SD]",
        help="synthetic instance; repeatable (three default instances "
             "when nothing is given)",
    )
    bench_p.add_argument("--penalty", default="scad", choices=["scad", "mcp"])
    bench_p.add_argument("--json", metavar="PATH",
                         help="write one JSON line per run")
    _add_solver_args(bench_p)
    return parser


def _add_instance_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="CSV", help="dataset file")
    src.add_argument("--synthetic", metavar="seed=S,n=N,p=P[,...]",
                     help="generate a synthetic instance")
    p.add_argument("--response", help="response column name (with --data)")
    p.add_argument("--standardize", dest="standardize", action="store_true",
                   default=True, help="z-score features, center response "
                                      "(default)")
    p.add_argument("--no-standardize", dest="standardize",
                   action="store_false")
    p.add_argument("--intercept", action="store_true",
                   help="append an unpenalized intercept column")


def _add_penalty_args(p: argparse.ArgumentParser):
    p.add_argument("--penalty", default="scad",
                   choices=["scad", "mcp", "l0", "lp"])
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="regularization strength (scad/mcp)")
    p.add_argument("--gamma", type=float, default=3.0,
                   help="nonconvexity parameter (scad/mcp)")
    p.add_argument("--power", type=float, default=1.0,
                   help="exponent for the lp penalty")
    p.add_argument("--weight", type=float, default=1.0,
                   help="weight for l0/lp penalties")
    p.add_argument("--budget", type=float, default=None,
                   help="solve the budget form: penalty(beta) <= budget")


def _add_solver_args(p: argparse.ArgumentParser):
    p.add_argument("--gap", type=float, default=0.05,
                   help="relative optimality gap target (default 0.05)")
    p.add_argument("--width", type=int, default=1000,
                   help="diagram width limit (default 1000)")
    p.add_argument("--parts", type=int, default=64,
                   help="sub-intervals per variable (default 64)")
    p.add_argument("--t-parts", type=int, default=None,
                   help="sub-intervals for the penalty epigraph variable")
    p.add_argument("--subgrad-iters", type=int, default=50)
    p.add_argument("--oa-iters", type=int, default=100)
    p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")
    p.add_argument("--node-limit", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true",
                   help="byte-identical reports across runs")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (node processing currently serial)")
    p.add_argument("--box", default=None, metavar="B | LO,HI | inf",
                   help="override variable bounds: symmetric radius, an "
                        "interval applied to all coordinates, or inf to "
                        "trigger root bound tightening")
    p.add_argument("--paper-profile", action="store_true",
                   help="width 10000 and 2500 sub-intervals per variable")


def _parse_kv_spec(spec: str) -> dict:
    out = {}
    for item in spec.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _synthetic_dataset(spec: str, standardize: bool) -> Dataset:
    kv = _parse_kv_spec(spec)
    try:
        seed = int(kv.pop("seed", 0))
        n = int(kv.pop("n"))
        p = int(kv.pop("p"))
        sparsity = int(kv.pop("sparsity", min(1, p)))
        noise = float(kv.pop("noise", 0.1))
    except KeyError as exc:
        raise ValueError(f"synthetic spec missing {exc}") from None
    if kv:
        raise ValueError(f"unknown synthetic keys: {sorted(kv)}")
    dataset, _ = synth(seed=seed, n=n, p=p, sparsity=sparsity, noise_sd=noise)
    if standardize:
        mean = dataset.X.mean(axis=0)
        sd = dataset.X.std(axis=0)
        if np.any(sd == 0.0):
            raise ValueError("synthetic design has a constant column")
        dataset = Dataset(
            X=(dataset.X - mean) / sd,
            y=dataset.y - dataset.y.mean(),
            feature_names=dataset.feature_names,
            provenance={**dataset.provenance, "standardize": True},
        )
    return dataset


def _parse_box(text: str, dim: int) -> Box:
    text = text.strip().lower()
    if text in ("inf", "+inf", "infinity"):
        return Box(np.full(dim, -np.inf), np.full(dim, np.inf))
    if "," in text:
        lo, hi = (float(v) for v in text.split(","))
    else:
        radius = float(text)
        lo, hi = -radius, radius
    return Box(np.full(dim, lo), np.full(dim, hi))


def _config_from_args(args) -> sbc.SolverConfig:
    if args.paper_profile:
        config = sbc.SolverConfig.paper_profile()
    else:
        config = sbc.SolverConfig(width_limit=args.width,
                                  partitions=args.parts)
    config.t_partitions = args.t_parts
    config.gap = args.gap
    config.subgradient_iters = args.subgrad_iters
    config.oa_iters = args.oa_iters
    config.time_limit = args.time_limit
    config.node_limit = args.node_limit
    config.seed = args.seed
    config.deterministic = args.deterministic
    config.threads = args.threads
    return config


def _cmd_solve(args) -> int:
    try:
        if args.data:
            if not args.response:
                raise ValueError("--response is required with --data")
            dataset = load_csv(args.data, args.response,
                               standardize=args.standardize)
            name = args.name or args.data
        else:
            dataset = _synthetic_dataset(args.synthetic, args.standardize)
            name = args.name or f"synthetic({args.synthetic})"
        box = _parse_box(args.box, dataset.num_features) if args.box else None
        problem = make_problem(
            dataset, penalty=args.penalty, lam=args.lam, gamma=args.gamma,
            power=args.power, weight=args.weight,
            form=BUDGET_FORM if args.budget is not None else PENALTY_FORM,
            budget=args.budget, intercept=args.intercept, box=box,
        )
        config = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = sbc.solve(problem, config, name=name)
    print(sbc.SolveReport.table_header())
    print(report.table_row())
    print(f"gap={report.gap:.4%} status={report.status} "
          f"nodes={report.node_count}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if report.status in (sbc.STATUS_TIME, sbc.STATUS_NODES) \
            and report.gap > config.gap:
        return 2
    return 0


_DEFAULT_BENCH = ["seed=1,n=40,p=3", "seed=2,n=40,p=3", "seed=3,n=40,p=3"]


def _cmd_bench(args) -> int:
    instances = []
    try:
        for spec in args.dataset:
            name, rest = spec.split("=", 1)
            path, response = rest.rsplit(":", 1)
            instances.append((name, load_csv(path, response,
                                             standardize=True)))
        synth_specs = args.synthetic or ([] if args.dataset else _DEFAULT_BENCH)
        for spec in synth_specs:
            instances.append((f"synthetic({spec})",
                              _synthetic_dataset(spec, standardize=False)))
        config = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    reports = []
    worst = 0
    for lam, gamma in ((1.0, 3.0), (10.0, 30.0)):
        print(f"penalty parameters (lambda, gamma) = ({lam:g}, {gamma:g})")
        print(sbc.SolveReport.table_header())
        for name, dataset in instances:
            problem = make_problem(dataset, penalty=args.penalty,
                                   lam=lam, gamma=gamma)
            report = sbc.solve(problem, config, name=name)
            reports.append(report)
            print(report.table_row())
            if report.status in (sbc.STATUS_TIME, sbc.STATUS_NODES) \
                    and report.gap > config.gap:
                worst = 2
        print()
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            for report in reports:
                fh.write(report.to_json() + "\n")
    return worst


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    return _cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
