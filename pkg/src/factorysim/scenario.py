"""Factory floor geometry: machine placement, UE placement, LOS tests.

The floor is a box of l x w x h meters with the gNB mounted under the
ceiling at the center.  Machines are cubes of side S arranged in production
lines; each UE is mounted on the top face of a host machine.  A link is LOS
when the UE-gNB segment misses every machine volume except the host's own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod

_PLACEMENT_ATTEMPTS = 10_000


class PlacementInfeasible(Exception):
    """Machine placement could not satisfy the spacing constraint."""


@dataclass(frozen=True)
class ScenarioConfig:
    floor_length_m: float = 20.0   # l
    floor_width_m: float = 20.0    # w
    floor_height_m: float = 4.0    # h, gNB mount height
    machine_side_m: float = 3.0    # S, cube edge
    machine_spacing_m: float = 5.0  # D, min center-to-center distance
    num_lines: int = 4             # W production lines
    machines_per_line: int = 4
    num_ues: int = 20
    ue_assignment: str = "round_robin"  # or "uniform"

    def validate(self) -> None:
        for name in ("floor_length_m", "floor_width_m", "floor_height_m",
                     "machine_side_m", "machine_spacing_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"scenario.{name} must be positive")
        if self.num_lines < 1:
            raise ValueError("scenario.num_lines must be >= 1")
        if self.machines_per_line < 1:
            raise ValueError("scenario.machines_per_line must be >= 1")
        if self.num_ues < 1:
            raise ValueError("scenario.num_ues must be >= 1")
        if self.machine_side_m >= min(self.floor_length_m, self.floor_width_m):
            raise ValueError("scenario.machine_side_m exceeds floor dimensions")
        if self.machine_side_m >= self.floor_height_m:
            raise ValueError("scenario.machine_side_m must be below floor_height_m")
        if self.machine_spacing_m < self.machine_side_m:
            raise ValueError(
                "scenario.machine_spacing_m must be >= machine_side_m")
        if self.ue_assignment not in ("round_robin", "uniform"):
            raise ValueError("scenario.ue_assignment must be round_robin or uniform")

    @property
    def num_machines(self) -> int:
        return self.num_lines * self.machines_per_line


@dataclass
class FactoryLayout:
    config: ScenarioConfig
    machines: np.ndarray           # (M, 3) cube centers, z = S/2
    line_of_machine: np.ndarray    # (M,) line index
    ue_pos: np.ndarray             # (N, 3), z = S (top face)
    ue_machine: np.ndarray         # (N,) host machine index
    gnb_pos: np.ndarray            # (3,)
    activation_order: list = field(default_factory=list)  # per line, machine ids by x asc

    def machine_bounds(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        s = self.config.machine_side_m
        c = self.machines[m]
        lo = np.array([c[0] - s / 2, c[1] - s / 2, 0.0])
        hi = np.array([c[0] + s / 2, c[1] + s / 2, s])
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "gnb_pos_m": [float(v) for v in self.gnb_pos],
            "machine_side_m": self.config.machine_side_m,
            "machines": [
                {"id": i, "center_m": [float(v) for v in self.machines[i]],
                 "line": int(self.line_of_machine[i])}
                for i in range(len(self.machines))
            ],
            "ues": [
                {"id": i, "pos_m": [float(v) for v in self.ue_pos[i]],
                 "machine": int(self.ue_machine[i])}
                for i in range(len(self.ue_pos))
            ],
            "activation_order": [[int(m) for m in line] for line in self.activation_order],
        }


def distance_3d(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def segment_intersects_box(p, q, lo, hi) -> bool:
    """Slab test: does segment p->q pass through the axis-aligned box."""
    p = np.asarray(p, dtype=float)
    d = np.asarray(q, dtype=float) - p
    tmin, tmax = 0.0, 1.0
    for ax in range(3):
        if abs(d[ax]) < 1e-15:
            if p[ax] < lo[ax] or p[ax] > hi[ax]:
                return False
        else:
            t1 = (lo[ax] - p[ax]) / d[ax]
            t2 = (hi[ax] - p[ax]) / d[ax]
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
            if tmin > tmax:
                return False
    return True


def _sample_centers(cfg: ScenarioConfig, rng, xlo: float, xhi: float,
                    ylo: float, yhi: float) -> np.ndarray:
    """Sample (M, 2) machine centers with min pairwise distance D.

    Sequential rejection sampling first; at densities where that jams
    (it stalls well below the achievable packing), fall back to drawing
    all centers at once and relaxing violations by iterative push-apart
    projection, restarting from a fresh draw when relaxation stalls.
    Raises PlacementInfeasible when the per-machine attempt budget or
    the restart budget is exhausted.
    """
    m_total = cfg.num_machines
    d_min = cfg.machine_spacing_m

    # Phase 1: rejection sampling, at most 500 darts per machine so the
    # jammed case fails over quickly.  A single machine has no pairwise
    # constraint and always lands on the first dart.
    centers = np.empty((m_total, 2))
    placed = 0
    for m in range(m_total):
        for _ in range(500):
            c = np.array([rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)])
            if m == 0 or np.min(
                    np.linalg.norm(centers[:m] - c, axis=1)) >= d_min:
                centers[m] = c
                placed += 1
                break
        else:
            break
    if placed == m_total:
        return centers

    # Phase 2: joint draw + repulsion projection.  Each sweep pushes every
    # violating pair apart symmetrically along its axis, then clamps to the
    # inset box.  Pairs are pushed slightly past d_min; without the margin
    # distances approach d_min from below and never clear the check.
    target = d_min * 1.001
    iu, ju = np.triu_indices(m_total, k=1)
    for _restart in range(20):
        pts = np.column_stack([rng.uniform(xlo, xhi, size=m_total),
                               rng.uniform(ylo, yhi, size=m_total)])
        for _ in range(_PLACEMENT_ATTEMPTS // 2):
            diff = pts[iu] - pts[ju]
            dist = np.hypot(diff[:, 0], diff[:, 1])
            bad = dist < d_min
            if not bad.any():
                return pts
            # Coincident points get a deterministic nudge direction.
            d_bad = dist[bad]
            u = diff[bad] / np.where(d_bad > 1e-12, d_bad, 1.0)[:, None]
            u[d_bad <= 1e-12] = (1.0, 0.0)
            push = 0.5 * (target - d_bad)[:, None] * u
            np.add.at(pts, iu[bad], push)
            np.add.at(pts, ju[bad], -push)
            pts[:, 0] = np.clip(pts[:, 0], xlo, xhi)
            pts[:, 1] = np.clip(pts[:, 1], ylo, yhi)
    raise PlacementInfeasible(
        f"no layout with min machine spacing {d_min} m found "
        f"after {_PLACEMENT_ATTEMPTS} attempts")


def generate_layout(cfg: ScenarioConfig, master_seed: int) -> FactoryLayout:
    """Sample a layout: machines by rejection sampling with a projection
    fallback at high packing density, UEs on machine top faces.

    Raises PlacementInfeasible when no valid machine arrangement is found
    within the attempt budget.
    """
    cfg.validate()
    rng = rngmod.substream(master_seed, rngmod.LAYOUT)
    s = cfg.machine_side_m
    half = s / 2
    xlo, xhi = half, cfg.floor_length_m - half
    ylo, yhi = half, cfg.floor_width_m - half
    if xlo > xhi or ylo > yhi:
        raise PlacementInfeasible("machine does not fit on the floor")

    centers_xy = _sample_centers(cfg, rng, xlo, xhi, ylo, yhi)
    centers = np.column_stack([centers_xy, np.full(cfg.num_machines, half)])

    line_of_machine = np.arange(cfg.num_machines) // cfg.machines_per_line

    # Activation order inside a line follows the physical arrangement.
    activation_order = []
    for line in range(cfg.num_lines):
        ids = np.nonzero(line_of_machine == line)[0]
        order = ids[np.argsort(centers[ids, 0], kind="stable")]
        activation_order.append([int(i) for i in order])

    n = cfg.num_ues
    if cfg.ue_assignment == "round_robin":
        ue_machine = np.arange(n) % cfg.num_machines
    else:
        ue_machine = rng.integers(0, cfg.num_machines, size=n)
    ue_pos = np.empty((n, 3))
    for i in range(n):
        c = centers[ue_machine[i]]
        ue_pos[i] = [rng.uniform(c[0] - half, c[0] + half),
                     rng.uniform(c[1] - half, c[1] + half),
                     s]

    gnb = np.array([cfg.floor_length_m / 2, cfg.floor_width_m / 2, cfg.floor_height_m])
    return FactoryLayout(config=cfg, machines=centers,
                         line_of_machine=line_of_machine.astype(int),
                         ue_pos=ue_pos, ue_machine=ue_machine.astype(int),
                         gnb_pos=gnb, activation_order=activation_order)


def is_los(layout: FactoryLayout, ue: int) -> bool:
    """True when no machine other than the UE's host blocks the path to the gNB."""
    p = layout.ue_pos[ue]
    q = layout.gnb_pos
    host = layout.ue_machine[ue]
    for m in range(len(layout.machines)):
        if m == host:
            continue
        lo, hi = layout.machine_bounds(m)
        if segment_intersects_box(p, q, lo, hi):
            return False
    return True
