"""Figure families rendered from run artifacts.

Each family function takes parsed artifacts, draws onto a fresh matplotlib
figure, saves it, and returns the plotted data (dict of arrays) so tests can
verify properties such as CDF monotonicity without decoding pixels.

Families
--------
curves        training loss / reward / rolling packet latency, per-seed runs
              of one scheduler; mean with a +-1 std band when several seeds
              are given.
overhead      feedback-broadcast size vs K and vs number of granted UEs,
              from an overhead.csv table; shows where the per-UE grant
              message total overtakes the fixed broadcast.
usage-cdf     empirical CDF of channels used per transmission opportunity
              (converged tail), one curve per run directory.
latency-bars  mean end-to-end latency by sweep axis value and scheduler,
              with across-seed std error bars, from sweep_agg.csv.
latency-dist  PDF (histogram) and CDF of delivered packet latency, one
              curve per run directory.
"""

from __future__ import annotations

import os
from collections import defaultdict

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .io import ArtifactError, RunArtifacts, read_csv_table, read_runs

MS = 1e3  # seconds -> milliseconds


def _save(fig, out: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)


def _band(ax, series: list[tuple[np.ndarray, np.ndarray]], label: str, color):
    """Plot mean of several (x, y) series on a common x grid, +-1 std band."""
    if len(series) == 1:
        x, y = series[0]
        ax.plot(x, y, color=color, label=label)
        return x, y, np.zeros_like(y)
    lo = max(float(x[0]) for x, _ in series)
    hi = min(float(x[-1]) for x, _ in series)
    grid = np.linspace(lo, hi, 256)
    ys = np.stack([np.interp(grid, x, y) for x, y in series])
    mean, std = ys.mean(axis=0), ys.std(axis=0)
    ax.plot(grid, mean, color=color, label=label)
    ax.fill_between(grid, mean - std, mean + std, color=color, alpha=0.25,
                    linewidth=0)
    return grid, mean, std


def _curve_xy(run: RunArtifacts, kind: str) -> tuple[np.ndarray, np.ndarray]:
    pts = run.curves.get(kind)
    if not pts:
        raise ArtifactError(f"{run.path}/curves.csv: no '{kind}' rows")
    arr = np.asarray(pts, dtype=float)
    return arr[:, 0], arr[:, 1]


def _latency_series(run: RunArtifacts, window: int = 50):
    """Rolling mean of delivered-packet latency ordered by generation time."""
    t = np.asarray([g for g, d in zip(run.packets["t_gen_s"],
                                      run.packets["delivered"]) if d],
                   dtype=float)
    lat = np.asarray([v for v, d in zip(run.packets["latency_s"],
                                        run.packets["delivered"]) if d],
                     dtype=float)
    if len(t) == 0:
        raise ArtifactError(f"{run.path}/packets.csv: no delivered packets")
    order = np.argsort(t, kind="stable")
    t, lat = t[order], lat[order]
    k = min(window, len(lat))
    kernel = np.ones(k) / k
    roll = np.convolve(lat, kernel, mode="valid")
    return t[k - 1:], roll * MS


def fig_curves(runs: list[RunArtifacts], out: str) -> dict:
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=False)
    data: dict = {}
    loss = [_curve_xy(r, "loss") for r in runs]
    x, m, s = _band(axes[0], loss, "training loss", "tab:red")
    data["loss"] = (x, m, s)
    axes[0].set_xlabel("decisions")
    axes[0].set_ylabel("loss (MSE)")
    axes[0].legend()

    reward = [_curve_xy(r, "reward") for r in runs]
    x, m, s = _band(axes[1], reward, "mean per-channel reward", "tab:blue")
    data["reward"] = (x, m, s)
    axes[1].set_xlabel("decisions")
    axes[1].set_ylabel("reward")
    axes[1].legend()

    lat = [_latency_series(r) for r in runs]
    x, m, s = _band(axes[2], lat, "rolling mean latency", "tab:green")
    data["latency"] = (x, m, s)
    axes[2].set_xlabel("packet generation time (s)")
    axes[2].set_ylabel("latency (ms)")
    axes[2].legend()

    fig.suptitle(f"training curves — {runs[0].label}, {len(runs)} seed(s)")
    _save(fig, out)
    return data


def fig_overhead(table_path: str, out: str) -> dict:
    _, cols = read_csv_table(table_path, required=(
        "k_channels", "num_ues", "num_active",
        "fci_bits_n3", "fci_bits_n2", "dci_bits_compact"))
    k = np.asarray(cols["k_channels"], dtype=float)
    n = np.asarray(cols["num_ues"], dtype=float)
    na = np.asarray(cols["num_active"], dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    data: dict = {"vs_k": {}, "vs_na": {}}

    # Left: bits vs K at the median N and N_a of the table.
    n0, na0 = np.median(n), np.median(na)
    sel = (n == n0) & (na == na0)
    order = np.argsort(k[sel])
    kk = k[sel][order]
    for col, label in (("fci_bits_n3", "broadcast feedback (N+3 alphabet)"),
                       ("fci_bits_n2", "broadcast feedback (N+2 alphabet)"),
                       ("dci_bits_compact", "per-UE grants (compact)")):
        y = np.asarray(cols[col], dtype=float)[sel][order]
        ax1.plot(kk, y, marker="o", label=label)
        data["vs_k"][col] = (kk, y)
    ax1.set_xlabel("channels K")
    ax1.set_ylabel(f"bits per SU (N={n0:g}, active={na0:g})")
    ax1.legend(fontsize=8)

    # Right: bits vs number of granted UEs at the median K and N.
    k0 = np.median(k)
    sel = (k == k0) & (n == n0)
    order = np.argsort(na[sel])
    aa = na[sel][order]
    for col, label in (("fci_bits_n3", "broadcast feedback"),
                       ("dci_bits_compact", "per-UE grants (compact)"),
                       ("dci_bits_full", "per-UE grants (full)")):
        if col not in cols:
            continue
        y = np.asarray(cols[col], dtype=float)[sel][order]
        ax2.plot(aa, y, marker="s", label=label)
        data["vs_na"][col] = (aa, y)
    ax2.set_xlabel("granted UEs N_a")
    ax2.set_ylabel(f"bits per SU (K={k0:g}, N={n0:g})")
    ax2.legend(fontsize=8)

    fig.suptitle("signalling overhead")
    _save(fig, out)
    return data


def fig_usage_cdf(runs: list[RunArtifacts], out: str) -> dict:
    fig, ax = plt.subplots(figsize=(6, 4))
    data: dict = {}
    for run in runs:
        support = run.summary.get("channel_usage_support")
        cdf = run.summary.get("channel_usage_cdf")
        if support is None or cdf is None:
            raise ArtifactError(
                f"{run.path}/summary.json: missing channel_usage_support/cdf")
        label = f"{run.label} seed {run.seed}"
        ax.step(support, cdf, where="post", label=label)
        data[label] = (np.asarray(support, dtype=float),
                       np.asarray(cdf, dtype=float))
    ax.set_xlabel("channels used per transmission opportunity")
    ax.set_ylabel("empirical CDF")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    fig.suptitle("channel usage (converged tail)")
    _save(fig, out)
    return data


def fig_latency_bars(agg_path: str, out: str) -> dict:
    _, cols = read_csv_table(agg_path, required=(
        "value", "scheduler", "mean_latency_s_mean", "mean_latency_s_std"))
    by_sched: dict[str, list[tuple]] = defaultdict(list)
    for v, sched, m, s in zip(cols["value"], cols["scheduler"],
                              cols["mean_latency_s_mean"],
                              cols["mean_latency_s_std"]):
        if m is not None:
            by_sched[sched].append((v, m * MS, (s or 0.0) * MS))
    if not by_sched:
        raise ArtifactError(f"{agg_path}: no rows with a mean latency")
    values = sorted({v for rows in by_sched.values() for v, _, _ in rows},
                    key=lambda v: (v is None, v))
    idx = {v: i for i, v in enumerate(values)}
    width = 0.8 / len(by_sched)
    fig, ax = plt.subplots(figsize=(7, 4))
    data: dict = {}
    for j, (sched, rows) in enumerate(sorted(by_sched.items())):
        xs = np.asarray([idx[v] + j * width for v, _, _ in rows])
        ms = np.asarray([m for _, m, _ in rows])
        ss = np.asarray([s for _, _, s in rows])
        ax.bar(xs, ms, width=width, yerr=ss, capsize=3, label=sched)
        data[sched] = (np.asarray([v for v, _, _ in rows]), ms, ss)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(values))])
    ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel("sweep axis value")
    ax.set_ylabel("mean E2E latency (ms)")
    ax.legend(fontsize=8)
    fig.suptitle("latency by configuration")
    _save(fig, out)
    return data


def fig_latency_dist(runs: list[RunArtifacts], out: str) -> dict:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
    data: dict = {}
    for run in runs:
        lat = np.asarray([v for v, d in zip(run.packets["latency_s"],
                                            run.packets["delivered"]) if d],
                         dtype=float) * MS
        if len(lat) == 0:
            raise ArtifactError(f"{run.path}/packets.csv: no delivered packets")
        label = f"{run.label} seed {run.seed}"
        ax1.hist(lat, bins=40, density=True, histtype="step", label=label)
        xs = np.sort(lat)
        cdf = np.arange(1, len(xs) + 1) / len(xs)
        ax2.plot(xs, cdf, label=label)
        data[label] = (xs, cdf)
    ax1.set_ylabel("PDF")
    ax1.legend(fontsize=8)
    ax2.set_xlabel("E2E latency (ms)")
    ax2.set_ylabel("CDF")
    ax2.set_ylim(0.0, 1.05)
    fig.suptitle("delivered-packet latency distribution")
    _save(fig, out)
    return data


def render(family: str, inputs: list[str], out: str) -> dict:
    """Render one figure family; returns the plotted data for verification."""
    if family == "curves":
        return fig_curves(read_runs(inputs), out)
    if family == "overhead":
        if len(inputs) != 1:
            raise ArtifactError("overhead family takes exactly one CSV path")
        return fig_overhead(inputs[0], out)
    if family == "usage-cdf":
        return fig_usage_cdf(read_runs(inputs), out)
    if family == "latency-bars":
        if len(inputs) != 1:
            raise ArtifactError("latency-bars family takes exactly one "
                                "sweep_agg.csv path")
        return fig_latency_bars(inputs[0], out)
    if family == "latency-dist":
        return fig_latency_dist(read_runs(inputs), out)
    raise ArtifactError(f"unknown figure family: {family}")


FAMILIES = ("curves", "overhead", "usage-cdf", "latency-bars", "latency-dist")
