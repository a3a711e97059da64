"""Synthetic artifact fixtures in the simulator's documented file formats."""

import json
import math
import os
import random

import pytest

HEADER = "# config_sha256=deadbeef seed={seed}\n"

PACKET_COLS = ("ue,pid,t_gen_s,size_bytes,delivered,t_first_tx_s,"
               "t_delivered_s,latency_s,within_threshold,"
               "t_p_s,t_ran_s,t_tx_s,t_das_s,t_gnb_s,t_cn_s")

SU_COLS = ("su,t_start_s,collisions,successes,outages,unused,tx_ues,"
           "bytes_delivered")


def write_run_dir(path: str, seed: int, scheduler: str = "disnets",
                  num_ues: int = 4, n_packets: int = 120,
                  n_sus: int = 200) -> str:
    """Write a small, internally consistent fake run directory."""
    rng = random.Random(seed)
    os.makedirs(path, exist_ok=True)
    su_dur = 7 / 60e3

    with open(os.path.join(path, "packets.csv"), "w") as f:
        f.write(HEADER.format(seed=seed))
        f.write(PACKET_COLS + "\n")
        for pid in range(n_packets):
            ue = pid % num_ues
            t_gen = pid * 0.9e-3
            delivered = rng.random() > 0.05
            if delivered:
                lat = rng.uniform(0.3e-3, 2.0e-3)
                row = [ue, pid, t_gen, 688, 1, t_gen + 0.1e-3,
                       t_gen + lat, lat, int(lat <= 1e-3),
                       0.1e-3, 0.05e-3, lat - 0.35e-3, 0.1e-3, 0.05e-3, 0.05e-3]
            else:
                row = [ue, pid, t_gen, 688, 0, "", "", "", 0,
                       "", "", "", "", "", ""]
            f.write(",".join(str(x) for x in row) + "\n")

    with open(os.path.join(path, "sus.csv"), "w") as f:
        f.write(HEADER.format(seed=seed))
        cols = SU_COLS + "," + ",".join(f"used_ue{u}" for u in range(num_ues))
        f.write(cols + "\n")
        for su in range(n_sus):
            used = [rng.choice([0, 0, 1, 2, 3]) for _ in range(num_ues)]
            tx = sum(1 for u in used if u)
            f.write(",".join(str(x) for x in
                             [su, su * su_dur, rng.randint(0, 1),
                              rng.randint(0, 3), 0, 8, tx, 96] + used) + "\n")

    with open(os.path.join(path, "curves.csv"), "w") as f:
        f.write(HEADER.format(seed=seed))
        f.write("kind,step,value\n")
        for i in range(20):
            step = (i + 1) * 100
            f.write(f"reward,{step},{-1.0 + 1.4 * (1 - math.exp(-i / 6))}\n")
        for i in range(20):
            step = (i + 1) * 100
            f.write(f"loss,{step},{2.0 * math.exp(-i / 5) + 0.4}\n")

    counts = [rng.random() for _ in range(6)]
    total = sum(counts)
    cdf, acc = [], 0.0
    for c in counts:
        acc += c / total
        cdf.append(min(acc, 1.0))
    summary = {
        "scheduler": scheduler, "seed": seed, "num_ues": num_ues,
        "k_channels": 6, "reliability": 0.8,
        "mean_latency_s": 0.9e-3, "latency_std_s": 0.2e-3,
        "channel_usage_support": list(range(1, 7)),
        "channel_usage_cdf": cdf,
        "channel_usage_samples": 40,
    }
    with open(os.path.join(path, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    return path


@pytest.fixture
def run_dirs(tmp_path):
    return [write_run_dir(str(tmp_path / f"seed{s}"), seed=s) for s in (0, 1, 2)]


@pytest.fixture
def overhead_csv(tmp_path):
    path = tmp_path / "overhead.csv"
    lines = ["# k_values=2,4,8 n_values=10 na_values=2,4",
             "k_channels,num_ues,num_active,fci_bits_n3,fci_bits_n3_ceil,"
             "fci_bits_n2,fci_bits_n2_ceil,dci_bits_compact,"
             "dci_bits_compact_ceil,dci_bits_full"]
    for k in (2, 4, 8):
        for na in (2, 4):
            fci3 = k * math.log2(13)
            fci2 = k * math.log2(12)
            dci = na * (math.log2(k) + 10)
            lines.append(",".join(str(v) for v in
                                  [k, 10, na, fci3, math.ceil(fci3), fci2,
                                   math.ceil(fci2), dci, math.ceil(dci),
                                   na * (math.log2(k) + 30)]))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def sweep_agg_csv(tmp_path):
    path = tmp_path / "sweep_agg.csv"
    lines = ["# config_sha256=deadbeef seeds=0,1,2",
             "axis,value,scheduler,n_seeds,reliability_mean,reliability_std,"
             "mean_latency_s_mean,mean_latency_s_std,"
             "collision_rate_mean,collision_rate_std"]
    for v in (10, 20):
        for sched, lat in (("disnets", 0.8e-3), ("gbs", 1.0e-3),
                           ("sps", 6.0e-3)):
            lines.append(f"scenario.num_ues,{v},{sched},3,0.8,0.05,"
                         f"{lat * (1 + v / 100)},{lat / 10},0.01,0.002")
    path.write_text("\n".join(lines) + "\n")
    return str(path)
