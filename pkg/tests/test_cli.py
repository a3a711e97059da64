"""CLI and config tests: YAML round-trips, field-naming errors, exit codes,
artifact layout, determinism, env overrides, sweep and overhead outputs."""

import csv
import glob
import json
import os

import pytest
import yaml

from factorysim import cli
from factorysim import config as cfgmod

TINY = {
    "scenario": {"floor_length_m": 20.0, "floor_width_m": 20.0,
                 "floor_height_m": 4.0, "machine_side_m": 3.0,
                 "machine_spacing_m": 5.0, "num_lines": 2,
                 "machines_per_line": 2, "num_ues": 4,
                 "ue_assignment": "round_robin"},
    "radio": {"num_channels": 12},
    "traffic": {"model": "periodic", "period_ms": 2.0,
                "activation_period_ms": 8.0},
    "timing": {"sim_time_s": 0.03, "latency_threshold_ms": 1.0},
    "scheduler": {"kind": "randomk", "randomk_channels": 2},
}


def _write(tmp_path, data, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


# ----------------------------------------------------------------- config

def test_config_roundtrip_and_hash():
    cfg = cfgmod.from_dict({})
    again = cfgmod.from_dict(yaml.safe_load(cfg.to_yaml()))
    assert again == cfg
    assert again.hash() == cfg.hash()
    bumped = cfg.with_override("traffic.t_min_ms", 3.0)
    assert bumped.traffic.t_min_s == pytest.approx(3e-3)
    assert bumped.hash() != cfg.hash()


def test_config_errors_name_the_field(tmp_path):
    with pytest.raises(cfgmod.ConfigError, match="scenario.bogus"):
        cfgmod.from_dict({"scenario": {"bogus": 1}})
    with pytest.raises(cfgmod.ConfigError, match="unknown section"):
        cfgmod.from_dict({"radios": {}})
    with pytest.raises(cfgmod.ConfigError, match="traffic.period_ms"):
        cfgmod.from_dict({"traffic": {"period_ms": "soon"}})
    with pytest.raises(cfgmod.ConfigError, match="radio.shadowing"):
        cfgmod.from_dict({"radio": {"shadowing": "yes please"}})
    with pytest.raises(cfgmod.ConfigError, match="scenario.num_ues"):
        cfgmod.from_dict({"scenario": {"num_ues": 0}})
    with pytest.raises(cfgmod.ConfigError, match="expected section.field"):
        cfgmod.from_dict({}).with_override("num_ues", 3)


def test_config_load_missing_file():
    with pytest.raises(FileNotFoundError):
        cfgmod.load("/nonexistent/exp.yaml")


# ------------------------------------------------------------- exit codes

def test_cli_exit_2_names_field(tmp_path, capsys):
    bad = dict(TINY, scenario=dict(TINY["scenario"], num_ues=0))
    rc = cli.main(["simulate", "--config", _write(tmp_path, bad)])
    assert rc == 2
    assert "scenario.num_ues" in capsys.readouterr().err


def test_cli_exit_2_missing_config(tmp_path, capsys):
    rc = cli.main(["simulate", "--config", str(tmp_path / "nope.yaml")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_cli_exit_3_static_grant_capacity(tmp_path, capsys):
    bad = dict(TINY,
               scenario=dict(TINY["scenario"], num_ues=20),
               traffic=dict(TINY["traffic"], period_ms=0.01),
               scheduler={"kind": "sps"})
    rc = cli.main(["simulate", "--config", _write(tmp_path, bad)])
    assert rc == 3
    assert "infeasible" in capsys.readouterr().err


def test_cli_exit_3_placement(tmp_path, capsys):
    bad = dict(TINY, scenario=dict(TINY["scenario"], machine_spacing_m=100.0))
    rc = cli.main(["simulate", "--config", _write(tmp_path, bad)])
    assert rc == 3
    assert "infeasible" in capsys.readouterr().err


# -------------------------------------------------------------- artifacts

EXPECTED_FILES = ["packets.csv", "sus.csv", "curves.csv", "summary.json",
                  "layout.json", "config.yaml"]


def test_cli_simulate_writes_artifacts(tmp_path, capsys):
    out = str(tmp_path / "run")
    rc = cli.main(["simulate", "--config", _write(tmp_path, TINY),
                   "--seed", "3", "--out", out])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "reliability=" in stdout and f"artifacts: {out}" in stdout
    for name in EXPECTED_FILES:
        assert os.path.exists(os.path.join(out, name)), name
    assert glob.glob(os.path.join(out, "*.tmp")) == []
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    assert summary["seed"] == 3
    assert summary["scheduler"] == "randomk"
    assert summary["generated_packets"] > 0
    # the config artifact embeds the hash of the exact config used
    head = open(os.path.join(out, "config.yaml")).readline()
    assert summary["config_sha256"] in head


def test_cli_simulate_deterministic_artifacts(tmp_path):
    cfg = _write(tmp_path, TINY)

    def run(out, seed):
        assert cli.main(["simulate", "--config", cfg, "--seed", str(seed),
                         "--out", out]) == 0
        return {name: open(os.path.join(out, name), "rb").read()
                for name in ("packets.csv", "summary.json")}

    a = run(str(tmp_path / "a"), 5)
    b = run(str(tmp_path / "b"), 5)
    c = run(str(tmp_path / "c"), 6)
    assert a == b                                  # byte-identical
    assert a["packets.csv"] != c["packets.csv"]


def test_cli_env_overrides(tmp_path, monkeypatch, capsys):
    out = str(tmp_path / "envrun")
    monkeypatch.setenv("FACTORYSIM_SEED", "11")
    monkeypatch.setenv("FACTORYSIM_OUT", out)
    monkeypatch.setenv("FACTORYSIM_SCHEDULER", "gbs")
    rc = cli.main(["simulate", "--config", _write(tmp_path, TINY)])
    assert rc == 0
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    assert summary["seed"] == 11
    assert summary["scheduler"] == "gbs"
    # explicit flags beat the environment
    rc = cli.main(["simulate", "--config", _write(tmp_path, TINY),
                   "--seed", "4", "--out", str(tmp_path / "flag"),
                   "--scheduler", "randomk"])
    assert rc == 0
    summary = json.loads(open(str(tmp_path / "flag/summary.json")).read())
    assert summary["seed"] == 4
    assert summary["scheduler"] == "randomk"


def test_cli_no_shadowing_flag(tmp_path):
    out = str(tmp_path / "nosh")
    rc = cli.main(["simulate", "--config", _write(tmp_path, TINY),
                   "--out", out, "--no-shadowing"])
    assert rc == 0
    cfg_text = open(os.path.join(out, "config.yaml")).read()
    assert "shadowing: false" in cfg_text


# ------------------------------------------------------------------ sweep

def _read_commented_csv(path):
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_cli_sweep_grid_and_aggregate(tmp_path, capsys):
    out = str(tmp_path / "sweep")
    rc = cli.main(["sweep", "--config", _write(tmp_path, TINY),
                   "--axis", "scenario.num_ues", "--values", "2,3",
                   "--schedulers", "randomk,gbs", "--seeds", "0,1",
                   "--out", out])
    assert rc == 0
    rows = _read_commented_csv(os.path.join(out, "sweep.csv"))
    assert len(rows) == 8                         # 2 values x 2 kinds x 2 seeds
    key = [(r["value"], r["scheduler"], r["seed"]) for r in rows]
    assert key == [(v, k, s) for v in ("2", "3") for k in ("randomk", "gbs")
                   for s in ("0", "1")]
    aggs = _read_commented_csv(os.path.join(out, "sweep_agg.csv"))
    assert len(aggs) == 4
    for agg in aggs:
        cell = [r for r in rows if (r["value"], r["scheduler"])
                == (agg["value"], agg["scheduler"])]
        assert agg["n_seeds"] == "2"
        want = sum(float(r["reliability"]) for r in cell) / 2
        assert float(agg["reliability_mean"]) == pytest.approx(want)
    # per-run artifact dirs exist
    assert os.path.isdir(os.path.join(out, "num_ues=2_randomk_seed0"))
    assert "agg scenario.num_ues=2 scheduler=gbs" in capsys.readouterr().out


def test_cli_sweep_axis_requires_values(tmp_path, capsys):
    rc = cli.main(["sweep", "--config", _write(tmp_path, TINY),
                   "--axis", "scenario.num_ues"])
    assert rc == 2
    assert "--axis and --values" in capsys.readouterr().err


def test_cli_sweep_rejects_unknown_scheduler(tmp_path, capsys):
    rc = cli.main(["sweep", "--config", _write(tmp_path, TINY),
                   "--schedulers", "greedy"])
    assert rc == 2
    assert "unknown kind" in capsys.readouterr().err


# ------------------------------------------------------------------ kstar

def test_cli_kstar_reports_best(tmp_path, capsys):
    out = str(tmp_path / "kstar")
    rc = cli.main(["kstar", "--config", _write(tmp_path, TINY),
                   "--candidates", "1,2", "--seeds", "0", "--out", out])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "best_k_star=" in stdout
    rows = _read_commented_csv(os.path.join(out, "kstar.csv"))
    assert {r["axis"] for r in rows} == {"scheduler.randomk_channels"}
    assert {r["value"] for r in rows} == {"1", "2"}


# --------------------------------------------------------------- overhead

def test_cli_overhead_table(tmp_path):
    import math

    out = str(tmp_path / "overhead.csv")
    rc = cli.main(["overhead", "--k-values", "100", "--n-values", "500",
                   "--na-values", "60", "--out", out])
    assert rc == 0
    rows = _read_commented_csv(out)
    assert len(rows) == 1
    row = rows[0]
    assert float(row["fci_bits_n3"]) == pytest.approx(100 * math.log2(503))
    assert row["fci_bits_n3_ceil"] == "900"
    assert float(row["dci_bits_compact"]) == pytest.approx(
        60 * (math.log2(100) + 10))
    assert row["dci_bits_full"] == "2220.0"


def test_cli_overhead_stdout(capsys):
    rc = cli.main(["overhead", "--k-values", "1", "--n-values", "1",
                   "--na-values", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "fci_bits_n3" in out
    assert "1,1,1," in out
