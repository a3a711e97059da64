"""Readers for the simulator's artifact files.

Every reader validates the pieces it needs and raises ArtifactError naming
the missing file or column, so the CLI can exit nonzero with a usable
message.  Input files are opened read-only and never modified.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field


class ArtifactError(Exception):
    """A required artifact file or column is missing or malformed."""


def _coerce(value: str):
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def read_csv_table(path: str, required: tuple[str, ...] = ()):
    """Parse one artifact CSV: leading '#' metadata lines, then a header row.

    Returns (meta, columns) where columns maps each header name to a list of
    coerced values ('' becomes None, numerics become int/float).
    """
    if not os.path.isfile(path):
        raise ArtifactError(f"missing artifact file: {path}")
    meta: dict[str, str] = {}
    with open(path, newline="") as f:
        pos = f.tell()
        line = f.readline()
        while line.startswith("#"):
            for pair in line[1:].split():
                if "=" in pair:
                    k, v = pair.split("=", 1)
                    meta[k] = v
            pos = f.tell()
            line = f.readline()
        f.seek(pos)
        reader = csv.DictReader(f)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise ArtifactError(f"{path}: missing column '{col}'")
        columns: dict[str, list] = {n: [] for n in names}
        for row in reader:
            for n in names:
                columns[n].append(_coerce(row[n]))
    return meta, columns


@dataclass
class RunArtifacts:
    """One run directory's artifacts, parsed."""

    path: str
    summary: dict
    curves: dict[str, list[tuple[int, float]]]   # kind -> [(step, value)]
    packets: dict[str, list] = field(default_factory=dict)
    sus: dict[str, list] = field(default_factory=dict)

    @property
    def label(self) -> str:
        sched = self.summary.get("scheduler")
        return sched or os.path.basename(self.path.rstrip("/"))

    @property
    def seed(self):
        return self.summary.get("seed")


def read_run(path: str) -> RunArtifacts:
    """Read one `simulate` output directory."""
    spath = os.path.join(path, "summary.json")
    if not os.path.isfile(spath):
        raise ArtifactError(f"missing artifact file: {spath}")
    with open(spath) as f:
        summary = json.load(f)

    _, cols = read_csv_table(os.path.join(path, "curves.csv"),
                             required=("kind", "step", "value"))
    curves: dict[str, list[tuple[int, float]]] = {}
    for kind, step, value in zip(cols["kind"], cols["step"], cols["value"]):
        curves.setdefault(kind, []).append((step, value))

    _, packets = read_csv_table(
        os.path.join(path, "packets.csv"),
        required=("ue", "t_gen_s", "delivered", "latency_s"))
    _, sus = read_csv_table(
        os.path.join(path, "sus.csv"),
        required=("su", "t_start_s", "collisions", "successes"))
    return RunArtifacts(path=path, summary=summary, curves=curves,
                        packets=packets, sus=sus)


def read_runs(paths: list[str]) -> list[RunArtifacts]:
    if not paths:
        raise ArtifactError("no artifact directories given")
    return [read_run(p) for p in paths]


def usage_columns(sus: dict[str, list]) -> list[str]:
    """Names of the per-UE channels-used columns, in UE order."""
    names = [n for n in sus if n.startswith("used_ue")]
    if not names:
        raise ArtifactError("sus.csv: missing per-UE 'used_ue*' columns")
    return sorted(names, key=lambda n: int(n[len("used_ue"):]))
