"""Command-line driver: ``stripwalk <command> [options]``."""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import exact
from .config import FORMATS, Manifest, coerce, load_manifest, to_text
from .errors import ConfigError, StripwalkError
from .experiments import get_experiment, list_experiments
from .model import Side, WalkSpec, kind_from_name, start_from_text
from .report import dumps, run_manifest, write_outputs
from .walk import METHODS, run_ensemble

WORKERS_ENV = "STRIPWALK_WORKERS"

SIMULATE_DEFAULTS = {
    "N": 100,
    "kind": "symmetric",
    "c": 1.0,
    "p": 0.6,
    "start": "uniform",
    "sites": "",
    "method": "trajectory",
    "replicas": 10_000,
    "seed": 1,
}

COMMAND_EXPERIMENTS = {
    "rayknight": ("rayknight-equivalence",),
    "diffusion": ("diffusion-limit",),
    "parity": ("parity-single", "parity-joint"),
}


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value manifest")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--format", choices=FORMATS, help="sample file format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stripwalk", description="Random walks absorbed at both ends of an interval.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in experiments")

    sim = sub.add_parser("simulate", help="simulate a walk ensemble")
    _common(sim)
    sim.add_argument("--N", type=int)
    sim.add_argument("--kind", choices=("symmetric", "weak", "asymmetric"))
    sim.add_argument("--c", type=float)
    sim.add_argument("--p", type=float)
    sim.add_argument("--start", help="uniform, alpha:A or fixed:X")
    sim.add_argument("--sites", help="comma-separated sites to record")
    sim.add_argument("--method", choices=METHODS)

    ex = sub.add_parser("exact", help="evaluate a closed-form probability")
    ex.add_argument("quantity", choices=("ruin", "range-tail", "range-limit", "visit", "escape", "parity", "entropy"))
    ex.add_argument("--N", type=int, default=100)
    ex.add_argument("--kind", choices=("symmetric", "weak", "asymmetric"), default="symmetric")
    ex.add_argument("--c", type=float, default=1.0)
    ex.add_argument("--p", type=float, default=0.6)
    for name in ("a", "z", "b", "x", "y", "m"):
        ex.add_argument(f"--{name}", type=int)
    ex.add_argument("--alpha", type=float)
    ex.add_argument("--beta", type=float)
    ex.add_argument("--condition", choices=("none", "left", "right"), default="none")

    cmp_ = sub.add_parser("compare", help="run verification experiments")
    _common(cmp_)
    cmp_.add_argument("--experiment", action="append", help="experiment id (repeatable; 'all' for every one)")

    for name, ids in COMMAND_EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"run {', '.join(ids)}")
        _common(p)
    return parser


def _manifest_from(args, exp_id: str) -> Manifest:
    if args.config:
        manifest = load_manifest(args.config)
        if "experiment" not in manifest:
            manifest = manifest.with_values(experiment=exp_id)
    else:
        manifest = Manifest({"experiment": exp_id})
    return manifest.with_values(seed=args.seed, replicas=args.replicas)


def _print_verdicts(summary: dict) -> None:
    for v in summary["verdicts"]:
        mark = "PASS" if v["passed"] else "FAIL"
        print(f"[{mark}] {v['name']}: {v['statistic']:.6g} {v['op']} {v['threshold']:.6g}  ({v['detail']})")


def _run_experiments(args, ids) -> int:
    workers = args.workers or _default_workers()
    fmt = args.format or "csv"
    ok = True
    for exp_id in ids:
        manifest = _manifest_from(args, exp_id)
        exp_id = manifest.get("experiment")
        out = None
        if args.out is not None:
            out = args.out / exp_id if len(ids) > 1 else args.out
        t0 = time.perf_counter()
        result, summary = run_manifest(manifest, out, workers, fmt)
        print(f"== {exp_id} ({time.perf_counter() - t0:.1f} s)", file=sys.stderr)
        _print_verdicts(summary)
        ok &= result.passed
    return 0 if ok else 1


def cmd_compare(args) -> int:
    if args.config and not args.experiment:
        ids = [load_manifest(args.config).get("experiment")]
        if ids[0] is None:
            raise ConfigError("manifest has no 'experiment' key")
    else:
        ids = args.experiment or ["all"]
    if "all" in ids:
        ids = [e.id for e in list_experiments()]
    for i in ids:
        get_experiment(i)
    return _run_experiments(args, ids)


def cmd_list(_args) -> int:
    for exp in list_experiments():
        print(f"{exp.id:28s} {exp.summary}")
    return 0


def _simulate_params(args) -> tuple[dict, Manifest]:
    manifest = load_manifest(args.config) if args.config else Manifest({})
    params = dict(SIMULATE_DEFAULTS)
    for key, raw in manifest.values.items():
        if key in ("workers", "out", "format", "experiment"):
            continue
        if key not in params:
            raise ConfigError(f"unknown key {key!r} for simulate")
        params[key] = coerce(key, raw, params[key])
    flags = {k: getattr(args, k) for k in ("N", "kind", "c", "p", "start", "sites", "method", "seed", "replicas")}
    flags = {k: v for k, v in flags.items() if v is not None}
    params.update(flags)
    if params["replicas"] < 1:
        raise ConfigError(f"replicas must be >= 1, got {params['replicas']}")
    if not args.config:
        manifest = Manifest({k: to_text(v) for k, v in params.items()})
    else:
        manifest = manifest.with_values(**{k: to_text(v) for k, v in flags.items()})
    return params, manifest


def cmd_simulate(args) -> int:
    params, manifest = _simulate_params(args)
    spec = WalkSpec(params["N"], kind_from_name(params["kind"], params["c"], params["p"]),
                    start_from_text(params["start"]))
    try:
        sites = [int(v) for v in params["sites"].split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sites must be comma-separated integers, got {params['sites']!r}") from None
    ens = run_ensemble(spec, params["replicas"], params["seed"], args.workers or _default_workers(),
                       sites=sites, method=params["method"])
    summary = {"manifest": manifest.echo(), "params": params, "ensemble": ens.to_dict()}
    if args.out is None:
        sys.stdout.write(dumps(summary))
        return 0
    header = ens.csv_header()
    rows = list(ens.csv_rows())
    columns = {name: np.array([r[j] for r in rows], dtype=object) for j, name in enumerate(header[1:], 1)}
    write_outputs(args.out, summary, {"walks": columns}, manifest, args.format or "csv")
    return 0


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"missing --{', --'.join(missing)}")


def cmd_exact(args) -> int:
    kind = kind_from_name(args.kind, args.c, args.p)
    spec = WalkSpec(args.N, kind)
    q = args.quantity
    if q == "ruin":
        _need(args, "a", "z", "b")
        value = exact.ruin_prob(spec, args.a, args.z, args.b)
    elif q == "range-tail":
        _need(args, "x", "m")
        value = exact.range_tail_exact(spec, args.x, args.m)
    elif q == "range-limit":
        _need(args, "alpha", "beta")
        value = exact.range_limit_law(kind, args.alpha).tail(args.beta)
    elif q == "visit":
        _need(args, "y")
        value = exact.point_visited_prob(spec, args.x, args.y)
    elif q == "escape":
        _need(args, "y")
        value = exact.escape_prob_exact(spec, args.y)
    elif q == "parity":
        _need(args, "x", "y")
        cond = None if args.condition == "none" else Side(args.condition)
        value = exact.parity_open_prob_exact(spec, args.x, args.y, cond)
    else:
        _need(args, "alpha")
        value = exact.expected_range_symmetric(args.alpha)
    print(f"{float(value):.12g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "exact":
            return cmd_exact(args)
        if args.command == "compare":
            return cmd_compare(args)
        ids = COMMAND_EXPERIMENTS[args.command]
        if args.config:
            ids = (load_manifest(args.config).get("experiment") or ids[0],)
        return _run_experiments(args, list(ids))
    except (StripwalkError, ValueError, OSError) as exc:
        print(f"stripwalk: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
