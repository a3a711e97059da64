"""Experiment drivers: assemble a world from a config, run it, write
artifacts, and run parameter sweeps.

A run is fully determined by (config, master seed).  Sweep workers execute
independent runs in separate processes; determinism is preserved because no
state crosses process boundaries except the (config, seed) pair.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass
from statistics import fmean, pstdev

from . import channel as chmod
from . import config as cfgmod
from . import mac as macmod
from . import metrics as metmod
from . import scenario as scnmod
from . import schedulers as schmod
from . import traffic as tfmod


@dataclass
class RunResult:
    summary: metmod.RunSummary
    world: macmod.World
    collector: metmod.MetricsCollector
    scheduler: object


def build_world(cfg: cfgmod.ExperimentConfig, master_seed: int) -> macmod.World:
    layout = scnmod.generate_layout(cfg.scenario, master_seed)
    links = chmod.build_links(layout, cfg.radio, master_seed)
    schedule = tfmod.ActivationSchedule.from_layout(layout, cfg.traffic.activation_period_s)
    states = tfmod.init_traffic(cfg.traffic, layout, schedule, master_seed)
    su = cfg.radio.su_duration_s()
    world = macmod.World(
        num_ues=cfg.scenario.num_ues,
        k_channels=cfg.radio.k_channels(),
        su_duration=su,
        symbol_time=cfg.radio.symbol_time_s(),
        n_sus=int(cfg.timing.sim_time_s / su),
        timing=cfg.timing,
        links=links,
        traffic_states=states,
        packet_bytes=cfg.traffic.packet_bytes,
        outage_reward=cfg.scheduler.outage_reward,
        layout=layout,
    )
    return world


def run_once(cfg: cfgmod.ExperimentConfig, master_seed: int,
             fci_variant: str = "n+3") -> RunResult:
    cfg.validate()
    world = build_world(cfg, master_seed)
    scheduler = schmod.make_scheduler(cfg.scheduler, cfg.agent, cfg.traffic,
                                      world, master_seed)
    collector = metmod.MetricsCollector(world.num_ues, world.k_channels)
    macmod.run(world, scheduler, collector)
    meta = {
        "config_sha256": cfg.hash(),
        "seed": master_seed,
        "scheduler": cfg.scheduler.kind.value,
    }
    if cfg.scheduler.kind == schmod.SchedulerKind.RANDOMK:
        meta["randomk_channels"] = cfg.scheduler.randomk_channels
    if isinstance(scheduler, schmod.SemiPersistentScheduler):
        meta["sps_period_sus"] = scheduler.period
        meta["sps_channels_per_ue"] = scheduler.per_ue
    summary = metmod.summarize(world, collector, meta, fci_variant)
    return RunResult(summary=summary, world=world, collector=collector,
                     scheduler=scheduler)


def simulate(cfg: cfgmod.ExperimentConfig, master_seed: int, outdir: str | None,
             fci_variant: str = "n+3", checkpoints: bool = False) -> RunResult:
    result = run_once(cfg, master_seed, fci_variant)
    if outdir:
        write_artifacts(result, cfg, outdir, checkpoints=checkpoints)
    return result


def write_artifacts(result: RunResult, cfg: cfgmod.ExperimentConfig,
                    outdir: str, checkpoints: bool = False) -> None:
    os.makedirs(outdir, exist_ok=True)
    meta = {"config_sha256": cfg.hash(),
            "seed": result.summary.data["seed"]}
    metmod.write_packets_csv(os.path.join(outdir, "packets.csv"), result.world, meta)
    metmod.write_sus_csv(os.path.join(outdir, "sus.csv"), result.world,
                         result.collector, meta)
    metmod.write_curves_csv(os.path.join(outdir, "curves.csv"), result.collector, meta)
    metmod.write_summary_json(os.path.join(outdir, "summary.json"), result.summary)
    metmod.write_layout_json(os.path.join(outdir, "layout.json"),
                             result.world.layout, meta)
    with open(os.path.join(outdir, "config.yaml"), "w") as f:
        f.write(f"# config_sha256={meta['config_sha256']} seed={meta['seed']}\n")
        f.write(cfg.to_yaml())
    if checkpoints and isinstance(result.scheduler, schmod.AgentScheduler):
        ckdir = os.path.join(outdir, "checkpoints")
        os.makedirs(ckdir, exist_ok=True)
        for ag in result.scheduler.agents:
            ag.save_checkpoint(os.path.join(ckdir, f"agent_{ag.ue:03d}.npz"))


SWEEP_COLUMNS = ["axis", "value", "scheduler", "seed", "reliability",
                 "mean_latency_s", "latency_std_s", "collision_rate",
                 "generated_packets", "delivered_packets",
                 "undelivered_packets", "k_channels", "num_ues"]

AGG_COLUMNS = ["axis", "value", "scheduler", "n_seeds",
               "reliability_mean", "reliability_std",
               "mean_latency_s_mean", "mean_latency_s_std",
               "collision_rate_mean", "collision_rate_std"]


def aggregate_sweep(rows: list[dict]) -> list[dict]:
    """Across-seed mean and std for each (value, scheduler) cell, in first-
    appearance order.  Cells where no seed delivered report empty latency."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["axis"], r["value"], r["scheduler"]), []).append(r)
    out = []
    for (axis, value, kind), cell in groups.items():
        agg = {"axis": axis, "value": value, "scheduler": kind,
               "n_seeds": len(cell)}
        for col in ("reliability", "mean_latency_s", "collision_rate"):
            vals = [r[col] for r in cell if r[col] is not None]
            agg[f"{col}_mean"] = fmean(vals) if vals else None
            agg[f"{col}_std"] = pstdev(vals) if vals else None
        out.append(agg)
    return out


def _sweep_cell(args):
    base_dict, axis, value, kind, seed, outdir, fci_variant = args
    cfg = cfgmod.from_dict(base_dict)
    if axis is not None:
        cfg = cfg.with_override(axis, value)
    cfg = cfg.with_override("scheduler.kind", kind)
    cfg.validate()
    rundir = None
    if outdir:
        label = "base" if axis is None else f"{axis.split('.')[-1]}={value}"
        rundir = os.path.join(outdir, f"{label}_{kind}_seed{seed}")
    result = simulate(cfg, seed, rundir, fci_variant)
    d = result.summary.data
    return {
        "axis": axis or "", "value": value if value is not None else "",
        "scheduler": kind, "seed": seed,
        "reliability": d["reliability"],
        "mean_latency_s": d["mean_latency_s"],
        "latency_std_s": d["latency_std_s"],
        "collision_rate": d["collision_rate"],
        "generated_packets": d["generated_packets"],
        "delivered_packets": d["delivered_packets"],
        "undelivered_packets": d["undelivered_packets"],
        "k_channels": d["k_channels"], "num_ues": d["num_ues"],
    }


def sweep(cfg: cfgmod.ExperimentConfig, axis: str | None, values: list,
          schedulers: list, seeds: list, outdir: str | None,
          workers: int = 1, fci_variant: str = "n+3") -> list[dict]:
    """Grid of runs over (axis value) x scheduler x seed; returns row dicts
    in deterministic grid order and writes sweep.csv when outdir is set."""
    base = cfg.to_dict()
    cells = [(base, axis, v, kind, seed, outdir, fci_variant)
             for v in (values if axis is not None else [None])
             for kind in schedulers
             for seed in seeds]
    if workers > 1 and len(cells) > 1:
        with multiprocessing.get_context("spawn").Pool(workers) as pool:
            rows = pool.map(_sweep_cell, cells)
    else:
        rows = [_sweep_cell(c) for c in cells]
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        header = f"# config_sha256={cfg.hash()} seeds={','.join(str(s) for s in seeds)}\n"
        path = os.path.join(outdir, "sweep.csv")
        with metmod._atomic_open(path) as f:
            f.write(header)
            f.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in rows:
                f.write(",".join(metmod._fmt(row[c]) for c in SWEEP_COLUMNS) + "\n")
        apath = os.path.join(outdir, "sweep_agg.csv")
        with metmod._atomic_open(apath) as f:
            f.write(header)
            f.write(",".join(AGG_COLUMNS) + "\n")
            for row in aggregate_sweep(rows):
                f.write(",".join(metmod._fmt(row[c]) for c in AGG_COLUMNS) + "\n")
    return rows


def optimize_kstar(cfg: cfgmod.ExperimentConfig, candidates: list, seeds: list,
                   outdir: str | None = None, workers: int = 1) -> tuple[int, list[dict]]:
    """Exhaustive search for the channels-per-transmission of the random
    policy: argmin of mean delivered latency averaged over seeds, ties to the
    smaller candidate.  Candidates with no deliveries are skipped."""
    rows = []
    for k_star in candidates:
        c = cfg.with_override("scheduler.randomk_channels", int(k_star))
        rows.extend(sweep(c, None, [None], [schmod.SchedulerKind.RANDOMK.value],
                          seeds, None, workers))
        for r in rows[-len(seeds):]:
            r["value"] = int(k_star)
            r["axis"] = "scheduler.randomk_channels"
    best, best_lat = None, None
    for k_star in candidates:
        lats = [r["mean_latency_s"] for r in rows
                if r["value"] == int(k_star) and r["mean_latency_s"] is not None]
        if not lats:
            continue
        mean = sum(lats) / len(lats)
        if best_lat is None or mean < best_lat or (mean == best_lat and k_star < best):
            best, best_lat = int(k_star), mean
    if best is None:
        raise schmod.ConfigInfeasible("no candidate delivered any packet")
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        path = os.path.join(outdir, "kstar.csv")
        with metmod._atomic_open(path) as f:
            f.write(f"# config_sha256={cfg.hash()} best={best}\n")
            f.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in rows:
                f.write(",".join(metmod._fmt(row[c]) for c in SWEEP_COLUMNS) + "\n")
    return best, rows
