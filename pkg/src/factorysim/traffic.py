"""Traffic generation driven by the production-line activation cycle.

One machine per line is active at a time; the active slot rotates every
tau_a through the line's machines in x order.  A UE generates packets only
while its host machine is active: the first arrival of a window falls one
inter-arrival draw after activation, and a pending arrival that lands past
deactivation is discarded (the next window starts with a fresh draw).
Queues are drained by the MAC regardless of activation state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from . import scenario as scn


class TrafficModel(str, enum.Enum):
    PERIODIC = "periodic"
    UNIFORM_APERIODIC = "uniform_aperiodic"
    UE_SPECIFIC_APERIODIC = "ue_specific_aperiodic"
    MIXED = "mixed"


@dataclass(frozen=True)
class TrafficConfig:
    model: TrafficModel = TrafficModel.UNIFORM_APERIODIC
    period_s: float = 2e-3          # tau, periodic inter-arrival
    t_min_s: float = 2e-3           # aperiodic lower bound
    t_max_s: float = 6e-3           # aperiodic upper bound
    aperiodic_fraction: float = 0.5  # mixed model only
    activation_period_s: float = 8e-3  # tau_a
    payload_bytes: int = 616        # Z_p
    header_bytes: int = 72          # H

    def validate(self) -> None:
        if self.period_s <= 0:
            raise ValueError("traffic.period_ms must be positive")
        if self.t_min_s <= 0:
            raise ValueError("traffic.t_min_ms must be positive")
        if self.t_max_s < self.t_min_s:
            raise ValueError("traffic.t_max_ms must be >= traffic.t_min_ms")
        if not 0.0 <= self.aperiodic_fraction <= 1.0:
            raise ValueError("traffic.aperiodic_fraction must be in [0, 1]")
        if self.activation_period_s <= 0:
            raise ValueError("traffic.activation_period_ms must be positive")
        if self.payload_bytes < 1:
            raise ValueError("traffic.payload_bytes must be >= 1")
        if self.header_bytes < 0:
            raise ValueError("traffic.header_bytes must be >= 0")

    @property
    def packet_bytes(self) -> int:
        return self.payload_bytes + self.header_bytes

    def nominal_interarrival_s(self) -> float:
        """Expected inter-arrival of the nominal model (used by grant-free
        configuration).  Mixed traffic uses the fraction-weighted mean."""
        aper = (self.t_min_s + self.t_max_s) / 2
        if self.model == TrafficModel.PERIODIC:
            return self.period_s
        if self.model == TrafficModel.MIXED:
            return (self.aperiodic_fraction * aper
                    + (1.0 - self.aperiodic_fraction) * self.period_s)
        return aper


@dataclass
class ActivationSchedule:
    tau_a_s: float
    order: list  # per line: machine ids in activation order
    slot_of_machine: dict = field(default_factory=dict)  # machine -> (slot, line_len)

    @classmethod
    def from_layout(cls, layout: scn.FactoryLayout, tau_a_s: float) -> "ActivationSchedule":
        sched = cls(tau_a_s=tau_a_s, order=[list(line) for line in layout.activation_order])
        for line in sched.order:
            for slot, m in enumerate(line):
                sched.slot_of_machine[m] = (slot, len(line))
        return sched

    def is_active(self, machine: int, t: float) -> bool:
        slot, nline = self.slot_of_machine[machine]
        return int(t / self.tau_a_s) % nline == slot

    def window(self, machine: int, i: int) -> tuple[float, float]:
        """i-th activation window of a machine, [start, end)."""
        slot, nline = self.slot_of_machine[machine]
        start = (slot + i * nline) * self.tau_a_s
        return start, start + self.tau_a_s


@dataclass
class UeTrafficState:
    ue: int
    machine: int
    rng: np.random.Generator
    model: TrafficModel          # resolved (mixed -> concrete model)
    period_s: float
    t_min_s: float               # per-UE bounds (ue_specific draws its own)
    t_max_s: float
    schedule: ActivationSchedule
    window_idx: int = 0
    next_arrival: float | None = None

    def draw(self) -> float:
        if self.model == TrafficModel.PERIODIC:
            return self.period_s
        return float(self.rng.uniform(self.t_min_s, self.t_max_s))


def draw_ue_bounds(rng: np.random.Generator, t_min_s: float,
                   t_max_s: float) -> tuple[float, float]:
    """Per-UE aperiodic bounds: lower uniform in [t_min, t_max], upper
    uniform in [lower, t_max]."""
    lo = float(rng.uniform(t_min_s, t_max_s))
    hi = float(rng.uniform(lo, t_max_s))
    return lo, hi


def init_traffic(cfg: TrafficConfig, layout: scn.FactoryLayout,
                 schedule: ActivationSchedule, master_seed: int) -> list[UeTrafficState]:
    cfg.validate()
    n = len(layout.ue_pos)

    aperiodic = np.zeros(n, dtype=bool)
    if cfg.model == TrafficModel.MIXED:
        k = int(round(cfg.aperiodic_fraction * n))
        perm = rngmod.substream(master_seed, rngmod.TRAFFIC_SETUP).permutation(n)
        aperiodic[perm[:k]] = True

    states = []
    for ue in range(n):
        rng = rngmod.substream(master_seed, rngmod.TRAFFIC, ue)
        model = cfg.model
        t_min, t_max = cfg.t_min_s, cfg.t_max_s
        if cfg.model == TrafficModel.MIXED:
            model = TrafficModel.UNIFORM_APERIODIC if aperiodic[ue] else TrafficModel.PERIODIC
        if model == TrafficModel.UE_SPECIFIC_APERIODIC:
            t_min, t_max = draw_ue_bounds(rng, cfg.t_min_s, cfg.t_max_s)
            model = TrafficModel.UNIFORM_APERIODIC
        st = UeTrafficState(ue=ue, machine=int(layout.ue_machine[ue]), rng=rng,
                            model=model, period_s=cfg.period_s,
                            t_min_s=t_min, t_max_s=t_max, schedule=schedule)
        start, _ = schedule.window(st.machine, 0)
        st.next_arrival = start + st.draw()
        _skip_discarded(st)
        states.append(st)
    return states


def _skip_discarded(st: UeTrafficState) -> None:
    # An arrival drawn past the window end never materializes; restart the
    # next window with a fresh draw.
    while True:
        _, end = st.schedule.window(st.machine, st.window_idx)
        if st.next_arrival < end:
            return
        st.window_idx += 1
        start, _ = st.schedule.window(st.machine, st.window_idx)
        st.next_arrival = start + st.draw()


def arrivals_until(st: UeTrafficState, t_end: float) -> list[float]:
    """Pop all generation instants strictly before t_end, advancing the state.

    Draw order depends only on emitted/discarded arrivals, never on how the
    caller chunks time, so chunking cannot change the sequence.
    """
    out = []
    while st.next_arrival is not None and st.next_arrival < t_end:
        t = st.next_arrival
        out.append(t)
        st.next_arrival = t + st.draw()
        _skip_discarded(st)
    return out
