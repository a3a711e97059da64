"""MAC layer: scheduling-unit timeline, queues, collision resolution and the
end-to-end latency accounting.

Time is continuous; transmissions happen on a grid of scheduling units (SUs)
of 7 symbols (2 control + 4 data + 1 guard).  A packet generated at t_gen
becomes transmittable T_P (one SU of PHY processing) later, at the first SU
whose start is >= t_gen + T_P.  Delivery happens at the end of the data
portion (4 symbols) of the SU carrying the packet's last byte.  End-to-end
latency is the fixed-order sum

    L = T_P + T_RAN + T_TX + T_DAS + T_gNB + T_CN

with T_RAN the wait between PHY arrival and first transmission attempt and
T_TX the span from first attempt to delivery (retransmissions included).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as chmod
from . import traffic as tfmod

OUTCOME_UNUSED = 0
OUTCOME_OUTAGE = -1
OUTCOME_COLLISION = -2

# PHY processing at the UE and at the gNB, in symbols (one SU each).
PROC_SYMBOLS = chmod.SYMBOLS_PER_SU

_BOUNDARY_EPS = 1e-9  # SU fractions; absorbs float noise at exact boundaries


@dataclass(frozen=True)
class TimingConfig:
    sim_time_s: float = 2.0
    latency_threshold_s: float = 1e-3   # L_th
    t_das_s: float = 0.05e-3            # distributed antenna run
    t_cn_s: float = 0.1e-3              # core network

    def validate(self) -> None:
        if self.sim_time_s <= 0:
            raise ValueError("timing.sim_time_s must be positive")
        if self.latency_threshold_s <= 0:
            raise ValueError("timing.latency_threshold_ms must be positive")
        if self.t_das_s < 0 or self.t_cn_s < 0:
            raise ValueError("timing delays must be >= 0")


@dataclass
class Packet:
    ue: int
    pid: int
    t_gen: float
    size_bytes: int
    remaining: int
    ready_su: int        # first SU whose start >= t_gen + T_P
    request_su: int      # first SU boundary strictly after PHY arrival
    t_first_tx: float | None = None
    first_tx_su: int | None = None
    t_delivered: float | None = None
    deliver_su: int | None = None
    requested: bool = False   # grant-based bookkeeping

    @property
    def delivered(self) -> bool:
        return self.t_delivered is not None


def make_packet(ue: int, pid: int, t_gen: float, size_bytes: int,
                su_duration: float, t_p: float) -> Packet:
    ready = t_gen + t_p
    x = ready / su_duration
    return Packet(ue=ue, pid=pid, t_gen=t_gen, size_bytes=size_bytes,
                  remaining=size_bytes,
                  ready_su=int(math.ceil(x - _BOUNDARY_EPS)),
                  request_su=int(math.floor(x + _BOUNDARY_EPS)) + 1)


@dataclass
class UeTransmission:
    ue: int
    modulation: int
    channels: list            # channels carrying the transmission, ascending
    slices: dict = field(default_factory=dict)   # channel -> [(Packet, bytes)]
    bytes_by_channel: dict = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_by_channel.values())


def drain_queue(queue, su_index: int, channels, modulation: int,
                ue: int) -> UeTransmission | None:
    """Pack ready FIFO bytes onto the granted channels (ascending).

    Channels beyond the ready backlog carry nothing and are dropped from the
    transmission; a zero-capacity link (outage modulation) transmits energy
    on every granted channel but moves no bytes.
    """
    channels = sorted(channels)
    if not channels:
        return None
    cap = chmod.bytes_per_channel(modulation)
    if cap == 0:
        # The UE cannot know its SNR is below threshold; it transmits anyway.
        if any(p.ready_su <= su_index for p in queue):
            return UeTransmission(ue=ue, modulation=modulation, channels=channels,
                                  slices={c: [] for c in channels},
                                  bytes_by_channel={c: 0 for c in channels})
        return None

    tx = UeTransmission(ue=ue, modulation=modulation, channels=[])
    it = iter(queue)
    pkt = next(it, None)
    taken = 0  # bytes of pkt already sliced this SU
    for c in channels:
        room = cap
        while room > 0 and pkt is not None and pkt.ready_su <= su_index:
            n = min(room, pkt.remaining - taken)
            if n > 0:
                tx.slices.setdefault(c, []).append((pkt, n))
                taken += n
                room -= n
            if taken >= pkt.remaining:
                pkt = next(it, None)
                taken = 0
        if room < cap:
            tx.channels.append(c)
            tx.bytes_by_channel[c] = cap - room
        if pkt is None or pkt.ready_su > su_index:
            break
    return tx if tx.channels else None


@dataclass
class ResolveResult:
    outcome: np.ndarray                  # (K,) int16 per-channel feedback
    rewards: dict                        # ue -> [(channel, reward)] ascending
    delivered: list                      # (ue, channel) whose payload got through
    collisions: int = 0
    outages: int = 0
    successes: int = 0


def resolve_su(txs: dict, k_channels: int, outage_reward: float = 0.0) -> ResolveResult:
    """Per-channel outcome of one SU given all transmissions.

    Outcome codes: 0 unused, -2 collision (>= 2 transmitters), -1 outage
    (single transmitter below SNR threshold), ue+1 on success.  Rewards per
    transmitted channel: -1 on collision, outage_reward on outage, and
    bytes_sent / bytes-at-max-modulation on success.
    """
    outcome = np.zeros(k_channels, dtype=np.int16)
    by_channel: dict[int, list] = {}
    for ue in sorted(txs):
        for c in txs[ue].channels:
            by_channel.setdefault(c, []).append(ue)
    res = ResolveResult(outcome=outcome, rewards={ue: [] for ue in txs}, delivered=[])
    for c in sorted(by_channel):
        ues = by_channel[c]
        if len(ues) >= 2:
            outcome[c] = OUTCOME_COLLISION
            res.collisions += 1
            for ue in ues:
                res.rewards[ue].append((c, -1.0))
        else:
            ue = ues[0]
            tx = txs[ue]
            if tx.modulation == 0:
                outcome[c] = OUTCOME_OUTAGE
                res.outages += 1
                res.rewards[ue].append((c, outage_reward))
            else:
                outcome[c] = ue + 1
                res.successes += 1
                res.rewards[ue].append(
                    (c, tx.bytes_by_channel[c] / chmod.MAX_BYTES_PER_CHANNEL))
                res.delivered.append((ue, c))
    return res


def latency_components(pkt: Packet, su_duration: float, symbol_time: float,
                       timing: TimingConfig) -> dict:
    """Per-packet latency decomposition; L is the fixed-order component sum."""
    t_p = PROC_SYMBOLS * symbol_time
    t_gnb = PROC_SYMBOLS * symbol_time
    t_ran = pkt.t_first_tx - pkt.t_gen - t_p
    t_tx = pkt.t_delivered - pkt.t_first_tx
    comp = {"t_p_s": t_p, "t_ran_s": t_ran, "t_tx_s": t_tx,
            "t_das_s": timing.t_das_s, "t_gnb_s": t_gnb, "t_cn_s": timing.t_cn_s}
    comp["latency_s"] = (comp["t_p_s"] + comp["t_ran_s"] + comp["t_tx_s"]
                         + comp["t_das_s"] + comp["t_gnb_s"] + comp["t_cn_s"])
    return comp


@dataclass
class World:
    num_ues: int
    k_channels: int
    su_duration: float
    symbol_time: float
    n_sus: int
    timing: TimingConfig
    links: list
    traffic_states: list
    packet_bytes: int
    outage_reward: float = 0.0
    queues: list = field(default_factory=list)
    packets: list = field(default_factory=list)
    fci: np.ndarray | None = None          # (n_sus, K) int16 feedback history
    ready_at: dict = field(default_factory=dict)  # su -> [Packet] becoming ready
    ready_bytes: np.ndarray | None = None
    layout: object = None

    def __post_init__(self):
        if not self.queues:
            self.queues = [[] for _ in range(self.num_ues)]
        if self.fci is None:
            self.fci = np.zeros((self.n_sus, self.k_channels), dtype=np.int16)
        if self.ready_bytes is None:
            self.ready_bytes = np.zeros(self.num_ues, dtype=np.int64)

    @property
    def t_p(self) -> float:
        return PROC_SYMBOLS * self.symbol_time

    def context_window(self, t: int, rows: int) -> np.ndarray:
        """Feedback rows t-rows .. t-1, zero-padded at the top, oldest first."""
        win = np.zeros((rows, self.k_channels), dtype=np.int16)
        lo = max(0, t - rows)
        if t > lo:
            win[rows - (t - lo):] = self.fci[lo:t]
        return win


def run(world: World, scheduler, metrics) -> None:
    """Drive the SU loop: arrivals, selection, drain, resolve, feedback."""
    su = world.su_duration
    pid = 0
    for t in range(world.n_sus):
        su_end = (t + 1) * su
        for st in world.traffic_states:
            for t_gen in tfmod.arrivals_until(st, su_end):
                pkt = make_packet(st.ue, pid, t_gen, world.packet_bytes,
                                  su, world.t_p)
                pid += 1
                world.queues[st.ue].append(pkt)
                world.packets.append(pkt)
                world.ready_at.setdefault(pkt.ready_su, []).append(pkt)
        for pkt in world.ready_at.pop(t, ()):
            world.ready_bytes[pkt.ue] += pkt.remaining

        ready = {ue: int(world.ready_bytes[ue])
                 for ue in range(world.num_ues) if world.ready_bytes[ue] > 0}
        grants = scheduler.select(t, ready)

        txs = {}
        for ue in sorted(grants):
            if not grants[ue]:
                continue
            tx = drain_queue(world.queues[ue], t, grants[ue],
                             world.links[ue].modulation, ue)
            if tx is None:
                continue
            txs[ue] = tx
            for slices in tx.slices.values():
                for pkt, _ in slices:
                    if pkt.first_tx_su is None:
                        pkt.first_tx_su = t
                        pkt.t_first_tx = t * su
        res = resolve_su(txs, world.k_channels, world.outage_reward)

        for ue, c in res.delivered:
            for pkt, n in txs[ue].slices[c]:
                pkt.remaining -= n
                world.ready_bytes[ue] -= n
                if pkt.remaining == 0:
                    pkt.deliver_su = t
                    pkt.t_delivered = t * su + chmod.DATA_SYMBOLS_PER_SU * world.symbol_time
                    world.queues[ue].remove(pkt)

        world.fci[t] = res.outcome
        train_events = scheduler.feedback(t, res, txs)
        metrics.on_su(t, res, txs, train_events)
