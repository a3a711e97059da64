"""Command line harness.

Subcommands: simulate (one run -> artifact directory), sweep (grid of runs ->
per-run artifacts + sweep.csv), kstar (search the random policy's channels
per transmission), overhead (signalling-size tables without simulation).

Exit codes: 0 success, 2 invalid configuration (message names the field),
3 runtime infeasibility (placement or static-grant capacity).

Environment overrides: FACTORYSIM_SEED, FACTORYSIM_OUT, FACTORYSIM_SCHEDULER,
FACTORYSIM_WORKERS take effect when the flag is not given explicitly.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from . import config as cfgmod
from . import metrics as metmod
from . import sim
from .scenario import PlacementInfeasible
from .schedulers import ConfigInfeasible, SchedulerKind

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(f"FACTORYSIM_{name}")
    if raw is None:
        return fallback
    return cast(raw)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--seed", type=int,
                   default=_env_default("SEED", int, 0), help="master seed")
    p.add_argument("--out", default=_env_default("OUT", str, None),
                   help="artifact directory")
    p.add_argument("--no-shadowing", action="store_true",
                   help="disable shadow fading regardless of config")
    p.add_argument("--fci-size-variant", choices=["n+3", "n+2"], default="n+3",
                   help="feedback alphabet size used in overhead reporting")


def _load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config)
    if getattr(args, "scheduler", None):
        cfg = cfg.with_override("scheduler.kind", args.scheduler)
    if getattr(args, "no_shadowing", False):
        cfg = cfg.with_override("radio.shadowing", False)
    cfg.validate()
    return cfg


def _parse_values(raw: str):
    return [yaml.safe_load(v) for v in raw.split(",") if v != ""]


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    result = sim.simulate(cfg, args.seed, args.out,
                          fci_variant=args.fci_size_variant,
                          checkpoints=args.checkpoints)
    d = result.summary.data
    print(f"scheduler={d['scheduler']} seed={d['seed']} "
          f"generated={d['generated_packets']} delivered={d['delivered_packets']} "
          f"reliability={d['reliability']:.6f} "
          f"mean_latency_s={d['mean_latency_s']}")
    if args.out:
        print(f"artifacts: {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = _parse_values(args.values) if args.values else [None]
    if (args.axis is None) != (args.values is None):
        raise cfgmod.ConfigError("sweep: --axis and --values must be given together")
    seeds = [int(s) for s in _parse_values(args.seeds)]
    kinds = [k.strip() for k in args.schedulers.split(",")]
    for k in kinds:
        if k not in [s.value for s in SchedulerKind]:
            raise cfgmod.ConfigError(f"scheduler.kind: unknown kind {k}")
    rows = sim.sweep(cfg, args.axis, values, kinds, seeds, args.out,
                     workers=args.workers, fci_variant=args.fci_size_variant)
    for row in rows:
        print(f"{row['axis']}={row['value']} scheduler={row['scheduler']} "
              f"seed={row['seed']} reliability={row['reliability']:.6f} "
              f"mean_latency_s={row['mean_latency_s']}")
    for agg in sim.aggregate_sweep(rows):
        lat = agg["mean_latency_s_mean"]
        lat_s = ("" if lat is None
                 else f"{lat:.6g}+/-{agg['mean_latency_s_std']:.2g}")
        print(f"agg {agg['axis']}={agg['value']} scheduler={agg['scheduler']} "
              f"n_seeds={agg['n_seeds']} "
              f"reliability={agg['reliability_mean']:.6f} "
              f"mean_latency_s={lat_s}")
    return 0


def cmd_kstar(args) -> int:
    cfg = _load_config(args)
    candidates = [int(v) for v in _parse_values(args.candidates)]
    seeds = [int(s) for s in _parse_values(args.seeds)]
    best, rows = sim.optimize_kstar(cfg, candidates, seeds, args.out,
                                    workers=args.workers)
    for row in rows:
        print(f"k_star={row['value']} seed={row['seed']} "
              f"mean_latency_s={row['mean_latency_s']}")
    print(f"best_k_star={best}")
    return 0


def cmd_overhead(args) -> int:
    k_values = [int(v) for v in _parse_values(args.k_values)]
    n_values = [int(v) for v in _parse_values(args.n_values)]
    na_values = [int(v) for v in _parse_values(args.na_values)]
    lines = [f"# k_values={args.k_values} n_values={args.n_values} "
             f"na_values={args.na_values}",
             "k_channels,num_ues,num_active,"
             "fci_bits_n3,fci_bits_n3_ceil,fci_bits_n2,fci_bits_n2_ceil,"
             "dci_bits_compact,dci_bits_compact_ceil,dci_bits_full"]
    for k in k_values:
        for n in n_values:
            for na in na_values:
                lines.append(",".join(metmod._fmt(v) for v in [
                    k, n, na,
                    metmod.fci_size_bits(k, n, "n+3"),
                    metmod.fci_size_bits_ceil(k, n, "n+3"),
                    metmod.fci_size_bits(k, n, "n+2"),
                    metmod.fci_size_bits_ceil(k, n, "n+2"),
                    metmod.dci_size_bits(na, k, compact=True),
                    metmod.dci_size_bits_ceil(na, k, compact=True),
                    metmod.dci_size_bits(na, k, compact=False),
                ]))
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with metmod._atomic_open(args.out) as f:
            f.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="factorysim",
                                 description="indoor-factory uplink scheduling simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment")
    _add_common(p)
    p.add_argument("--scheduler", default=_env_default("SCHEDULER", str, None),
                   choices=[k.value for k in SchedulerKind],
                   help="override scheduler.kind")
    p.add_argument("--checkpoints", action="store_true",
                   help="write per-agent checkpoints")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of runs over an axis")
    _add_common(p)
    p.add_argument("--axis", help="dotted config field, e.g. scenario.num_ues")
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--schedulers", default="disnets",
                   help="comma-separated scheduler kinds")
    p.add_argument("--seeds", default="0", help="comma-separated master seeds")
    p.add_argument("--workers", type=int,
                   default=_env_default("WORKERS", int, 1))
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("kstar", help="search randomk channels per transmission")
    _add_common(p)
    p.add_argument("--candidates", default="1,2,3,5")
    p.add_argument("--seeds", default="0")
    p.add_argument("--workers", type=int,
                   default=_env_default("WORKERS", int, 1))
    p.set_defaults(fn=cmd_kstar)

    p = sub.add_parser("overhead", help="signalling size tables")
    p.add_argument("--k-values", default="12,84", dest="k_values")
    p.add_argument("--n-values", default="20,40,100,500", dest="n_values")
    p.add_argument("--na-values", default="1,20,60,100", dest="na_values")
    p.add_argument("--out", default=_env_default("OUT", str, None))
    p.set_defaults(fn=cmd_overhead)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except cfgmod.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlacementInfeasible, ConfigInfeasible) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
