"""Run statistics, signalling-overhead formulas and artifact writers.

Reliability counts a packet as a success only when it is delivered within
the latency budget; packets still queued at the end of the run are
failures.  Latency means/stds are over delivered packets only.  All CSV/JSON
artifacts embed the config hash and master seed so a figure can always be
traced back to the exact run that produced it.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mac as macmod


def fci_size_bits(k_channels: int, num_ues: int, variant: str = "n+3") -> float:
    """Broadcast feedback size per SU: K symbols over N ids + special marks.

    variant n+3 counts unused/outage/collision marks beside the N ids; n+2
    packs unused and outage together.  Non-integer (information-theoretic)
    value; use ceil_bits for the transported size.
    """
    if variant not in ("n+3", "n+2"):
        raise ValueError("fci variant must be n+3 or n+2")
    extra = 3 if variant == "n+3" else 2
    return k_channels * math.log2(num_ues + extra)


def fci_size_bits_ceil(k_channels: int, num_ues: int, variant: str = "n+3") -> int:
    extra = 3 if variant == "n+3" else 2
    return k_channels * math.ceil(math.log2(num_ues + extra))


def dci_size_bits(num_active: int, k_channels: int, compact: bool = True) -> float:
    """Downlink grant signalling per SU for a grant-based scheduler.

    Compact format: a channel index plus a 10-bit allocation descriptor per
    active UE; full format: the standard 37-bit grant per active UE.
    """
    if compact:
        return num_active * (math.log2(k_channels) + 10.0)
    return num_active * 37.0


def dci_size_bits_ceil(num_active: int, k_channels: int, compact: bool = True) -> int:
    if compact:
        return num_active * (math.ceil(math.log2(k_channels)) + 10)
    return num_active * 37


@dataclass
class SuRow:
    su: int
    collisions: int
    successes: int
    outages: int
    unused: int
    tx_ues: int
    bytes_delivered: int


class MetricsCollector:
    """Accumulates per-SU aggregates, reward/loss curves and usage counts."""

    REWARD_SAMPLE_EVERY = 100  # decisions per reward-curve point

    def __init__(self, num_ues: int, k_channels: int):
        self.num_ues = num_ues
        self.k = k_channels
        self.su_rows: list[SuRow] = []
        self.usage: list[np.ndarray] = []      # per SU: channels used per UE
        self.loss_curve: list[tuple] = []      # (decision_total, mean minibatch loss)
        self.reward_curve: list[tuple] = []    # (decision_total, mean reward)
        self._decision_total = 0
        self._reward_acc = 0.0
        self._reward_n = 0
        self._block_start = 0

    def on_su(self, t: int, res, txs: dict, train_events) -> None:
        counts = np.zeros(self.num_ues, dtype=np.int32)
        bytes_delivered = 0
        for ue, tx in txs.items():
            counts[ue] = len(tx.channels)
        for ue, c in res.delivered:
            bytes_delivered += txs[ue].bytes_by_channel[c]
        unused = int(np.sum(res.outcome == macmod.OUTCOME_UNUSED))
        self.su_rows.append(SuRow(su=t, collisions=res.collisions,
                                  successes=res.successes, outages=res.outages,
                                  unused=unused, tx_ues=len(txs),
                                  bytes_delivered=bytes_delivered))
        self.usage.append(counts)

        for ue in sorted(txs):
            pairs = res.rewards[ue]
            self._decision_total += 1
            for _, r in pairs:
                self._reward_acc += r
                self._reward_n += 1
            if self._decision_total - self._block_start >= self.REWARD_SAMPLE_EVERY:
                self.reward_curve.append(
                    (self._decision_total,
                     self._reward_acc / max(1, self._reward_n)))
                self._reward_acc = 0.0
                self._reward_n = 0
                self._block_start = self._decision_total
        for _ue, loss in (train_events or []):
            self.loss_curve.append((self._decision_total, float(loss)))


def channel_usage_cdf(world, usage: list, last_packets: int = 10):
    """CDF of channels-per-transmission inside each UE's last-n-packet window.

    For each UE the window opens at the first transmission SU of its n-th
    most recent transmitted packet; the per-SU channel counts of that UE in
    the window are pooled across UEs.
    """
    usage_arr = np.stack(usage) if usage else np.zeros((0, world.num_ues), dtype=np.int32)
    values = []
    for ue in range(world.num_ues):
        pkts = [p for p in world.packets if p.ue == ue and p.first_tx_su is not None]
        if not pkts:
            continue
        tail = pkts[-last_packets:]
        start = min(p.first_tx_su for p in tail)
        col = usage_arr[start:, ue]
        values.extend(int(v) for v in col[col > 0])
    support = list(range(1, world.k_channels + 1))
    if not values:
        return support, [0.0] * world.k_channels, 0
    arr = np.asarray(values)
    cdf = [float(np.mean(arr <= x)) for x in support]
    return support, cdf, len(values)


@dataclass
class RunSummary:
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)


def summarize(world, collector: MetricsCollector, meta: dict,
              fci_variant: str = "n+3") -> RunSummary:
    packets = world.packets
    generated = len(packets)
    delivered = [p for p in packets if p.delivered]
    lat = []
    within = 0
    for p in delivered:
        comp = macmod.latency_components(p, world.su_duration,
                                         world.symbol_time, world.timing)
        lat.append(comp["latency_s"])
        if comp["latency_s"] <= world.timing.latency_threshold_s:
            within += 1
    empty = generated == 0
    if empty:
        warnings.warn("no packets generated; reliability reported as 1.0")
    reliability = 1.0 if empty else within / generated

    n_sus = world.n_sus
    collisions = sum(r.collisions for r in collector.su_rows)
    outages = sum(r.outages for r in collector.su_rows)
    successes = sum(r.successes for r in collector.su_rows)
    support, cdf, n_usage = channel_usage_cdf(world, collector.usage)

    data = dict(meta)
    data.update({
        "schema_version": 1,
        "num_ues": world.num_ues,
        "k_channels": world.k_channels,
        "n_sus": n_sus,
        "su_duration_s": world.su_duration,
        "effective_sim_time_s": n_sus * world.su_duration,
        "generated_packets": generated,
        "delivered_packets": len(delivered),
        "delivered_within_threshold": within,
        "undelivered_packets": generated - len(delivered),
        "reliability": reliability,
        "empty_traffic_warning": empty,
        "mean_latency_s": float(np.mean(lat)) if lat else None,
        "latency_std_s": float(np.std(lat)) if lat else None,
        "collision_rate": collisions / (n_sus * world.k_channels),
        "collision_sus": collisions,
        "outage_channel_events": outages,
        "success_channel_events": successes,
        "channel_usage_support": support,
        "channel_usage_cdf": cdf,
        "channel_usage_samples": n_usage,
        "reward_curve": [[int(d), float(r)] for d, r in collector.reward_curve],
        "loss_curve": [[int(d), float(v)] for d, v in collector.loss_curve],
        "fci_bits_per_su": fci_size_bits_ceil(world.k_channels, world.num_ues, fci_variant),
        "fci_bits_per_su_float": fci_size_bits(world.k_channels, world.num_ues, fci_variant),
        "fci_variant": fci_variant,
    })
    return RunSummary(data=data)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header_lines(meta: dict) -> str:
    pairs = " ".join(f"{k}={meta[k]}" for k in ("config_sha256", "seed") if k in meta)
    return f"# {pairs}\n"


class _atomic_open:
    """Write to a temp file and rename into place on clean exit."""

    def __init__(self, path: str):
        self.path = path
        self.tmp = path + ".tmp"

    def __enter__(self):
        self.f = open(self.tmp, "w", newline="")
        return self.f

    def __exit__(self, exc_type, exc, tb):
        self.f.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


def write_packets_csv(path: str, world, meta: dict) -> None:
    cols = ["ue", "pid", "t_gen_s", "size_bytes", "delivered", "t_first_tx_s",
            "t_delivered_s", "latency_s", "within_threshold",
            "t_p_s", "t_ran_s", "t_tx_s", "t_das_s", "t_gnb_s", "t_cn_s"]
    with _atomic_open(path) as f:
        f.write(_header_lines(meta))
        f.write(",".join(cols) + "\n")
        for p in world.packets:
            row = [p.ue, p.pid, repr(p.t_gen), p.size_bytes, int(p.delivered),
                   _fmt(p.t_first_tx)]
            if p.delivered:
                comp = macmod.latency_components(p, world.su_duration,
                                                 world.symbol_time, world.timing)
                row += [repr(p.t_delivered), repr(comp["latency_s"]),
                        int(comp["latency_s"] <= world.timing.latency_threshold_s),
                        repr(comp["t_p_s"]), repr(comp["t_ran_s"]),
                        repr(comp["t_tx_s"]), repr(comp["t_das_s"]),
                        repr(comp["t_gnb_s"]), repr(comp["t_cn_s"])]
            else:
                row += ["", "", 0, "", "", "", "", "", ""]
            f.write(",".join(str(x) for x in row) + "\n")


def write_sus_csv(path: str, world, collector: MetricsCollector, meta: dict) -> None:
    cols = ["su", "t_start_s", "collisions", "successes", "outages", "unused",
            "tx_ues", "bytes_delivered"]
    cols += [f"used_ue{u}" for u in range(world.num_ues)]
    with _atomic_open(path) as f:
        f.write(_header_lines(meta))
        f.write(",".join(cols) + "\n")
        for row, counts in zip(collector.su_rows, collector.usage):
            vals = [row.su, repr(row.su * world.su_duration), row.collisions,
                    row.successes, row.outages, row.unused, row.tx_ues,
                    row.bytes_delivered]
            vals += [int(c) for c in counts]
            f.write(",".join(str(x) for x in vals) + "\n")


def write_curves_csv(path: str, collector: MetricsCollector, meta: dict) -> None:
    with _atomic_open(path) as f:
        f.write(_header_lines(meta))
        f.write("kind,step,value\n")
        for d, r in collector.reward_curve:
            f.write(f"reward,{d},{r!r}\n")
        for d, v in collector.loss_curve:
            f.write(f"loss,{d},{v!r}\n")


def write_summary_json(path: str, summary: RunSummary) -> None:
    with _atomic_open(path) as f:
        f.write(summary.to_json())
        f.write("\n")


def write_layout_json(path: str, layout, meta: dict) -> None:
    data = dict(meta)
    data["layout"] = layout.to_dict()
    with _atomic_open(path) as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
