"""Channel-allocation policies: the learning agents and three baselines.

All policies expose select(t, ready) -> {ue: channels} and feedback(t, ...).
Grant-based and grant-free allocations are disjoint by construction, so they
can never collide; the distributed policies may collide and learn (or not)
from the broadcast feedback.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import agent as agmod
from . import channel as chmod
from . import rng as rngmod
from . import traffic as tfmod


class ConfigInfeasible(Exception):
    """The requested static configuration cannot serve the population."""


class SchedulerKind(str, enum.Enum):
    DISNETS = "disnets"
    NLTS = "nlts"
    RANDOMK = "randomk"
    GBS = "gbs"
    SPS = "sps"


@dataclass(frozen=True)
class SchedulerConfig:
    kind: SchedulerKind = SchedulerKind.DISNETS
    randomk_channels: int = 2     # K*, channels per transmission for randomk
    grant_delay_sus: int = 3      # request -> grant pipeline of the grant-based policy
    outage_reward: float = 0.0

    def validate(self, k_channels: int) -> None:
        if not 1 <= self.randomk_channels <= k_channels:
            raise ValueError("scheduler.randomk_channels must be in [1, num_channels]")
        if self.grant_delay_sus < 0:
            raise ValueError("scheduler.grant_delay_sus must be >= 0")


class AgentScheduler:
    """Distributed learning policy: one agent per UE over broadcast feedback."""

    learning = True

    def __init__(self, agent_cfg: agmod.AgentConfig, world, master_seed: int,
                 mode: str = "multi"):
        self.world = world
        self.cfg = agent_cfg
        self.agents = [
            agmod.Agent(agent_cfg, ue, world.k_channels,
                        rngmod.substream(master_seed, rngmod.AGENT, ue), mode=mode)
            for ue in range(world.num_ues)
        ]

    def select(self, t: int, ready: dict) -> dict:
        out = {}
        win = self.world.context_window(t, self.cfg.context_rows)
        for ue in sorted(ready):
            ctx = agmod.encode_context(win, ue)
            if self.cfg.include_queue_row:
                backlog = ready[ue] / self.world.packet_bytes
                row = np.full((1, self.world.k_channels),
                              min(1.0, backlog / 10.0))
                ctx = np.vstack([ctx, row])
            out[ue] = self.agents[ue].select(ctx)
        return out

    def feedback(self, t: int, res, txs: dict):
        events = []
        for ue in sorted(txs):
            pairs = res.rewards[ue]
            losses = self.agents[ue].observe([c for c, _ in pairs],
                                             [r for _, r in pairs])
            if losses:
                events.append((ue, float(np.mean(losses))))
        return events


class RandomKScheduler:
    """Each backlogged UE transmits on a fresh uniform K*-subset every SU."""

    learning = False

    def __init__(self, k_channels: int, k_star: int, num_ues: int, master_seed: int):
        self.k = k_channels
        self.k_star = k_star
        self.rngs = [rngmod.substream(master_seed, rngmod.SCHEDULER, ue)
                     for ue in range(num_ues)]

    def select(self, t: int, ready: dict) -> dict:
        return {ue: sorted(int(c) for c in
                           self.rngs[ue].choice(self.k, size=self.k_star, replace=False))
                for ue in sorted(ready)}

    def feedback(self, t, res, txs):
        return []


class GrantScheduler:
    """Request/grant pipeline: a UE with new ready data requests at the next
    SU boundary; a request becomes grantable grant_delay_sus later; the gNB
    grants channels FIFO by request SU with a round-robin tie-break, up to
    the channels needed for the requested bytes, never more than K per SU."""

    learning = False

    def __init__(self, world, grant_delay_sus: int = 3):
        self.world = world
        self.delay = grant_delay_sus
        self.requests = []   # [request_su, ue, bytes_left], FIFO
        self.cursor = 0

    def _collect(self, t: int) -> None:
        for ue in range(self.world.num_ues):
            for pkt in self.world.queues[ue]:
                if pkt.request_su <= t and not pkt.requested:
                    pkt.requested = True
                    self.requests.append([pkt.request_su, ue, pkt.remaining])

    def select(self, t: int, ready: dict) -> dict:
        self._collect(t)
        n = self.world.num_ues
        avail = self.world.k_channels
        next_ch = 0
        grants: dict[int, list] = {}
        keep = []
        order = sorted(range(len(self.requests)),
                       key=lambda i: (self.requests[i][0],
                                      (self.requests[i][1] - self.cursor) % n, i))
        granted_ue = None
        for i in order:
            req = self.requests[i]
            if req[0] + self.delay > t or avail == 0:
                keep.append(i)
                continue
            m = self.world.links[req[1]].modulation
            if m == 0:
                continue  # unserviceable link; request dropped
            need = math.ceil(req[2] / chmod.bytes_per_channel(m))
            c = min(need, avail)
            grants.setdefault(req[1], []).extend(range(next_ch, next_ch + c))
            next_ch += c
            avail -= c
            granted_ue = req[1]
            if c * chmod.bytes_per_channel(m) >= req[2]:
                continue  # fully granted, drop the request
            req[2] -= c * chmod.bytes_per_channel(m)
            keep.append(i)
        self.requests = [self.requests[i] for i in sorted(keep)]
        if granted_ue is not None:
            self.cursor = (granted_ue + 1) % n
        return grants

    def feedback(self, t, res, txs):
        return []


class SemiPersistentScheduler:
    """Static grant-free partition: period P SUs from the nominal traffic
    inter-arrival; UEs are split into P phase groups and the K channels are
    shared round-robin inside the active group, so every UE owns at least
    one channel once per period.  Never reconfigures."""

    learning = False

    def __init__(self, traffic_cfg: tfmod.TrafficConfig, su_duration: float,
                 num_ues: int, k_channels: int):
        self.n = num_ues
        self.k = k_channels
        self.period = max(1, int(math.floor(
            traffic_cfg.nominal_interarrival_s() / su_duration + 0.5)))
        group_size = math.ceil(num_ues / self.period)
        self.per_ue = k_channels // group_size
        if self.per_ue < 1:
            raise ConfigInfeasible(
                f"{num_ues} UEs need more than {k_channels} channels every "
                f"{self.period} SUs; N must be <= K * P")
        self.groups = [[ue for ue in range(num_ues) if ue % self.period == g]
                       for g in range(self.period)]

    def select(self, t: int, ready: dict) -> dict:
        group = self.groups[t % self.period]
        out = {}
        for j, ue in enumerate(group):
            if ue in ready:
                out[ue] = list(range(j * self.per_ue, (j + 1) * self.per_ue))
        return out

    def feedback(self, t, res, txs):
        return []


def make_scheduler(cfg: SchedulerConfig, agent_cfg: agmod.AgentConfig,
                   traffic_cfg: tfmod.TrafficConfig, world, master_seed: int):
    cfg.validate(world.k_channels)
    if cfg.kind == SchedulerKind.DISNETS:
        return AgentScheduler(agent_cfg, world, master_seed, mode="multi")
    if cfg.kind == SchedulerKind.NLTS:
        return AgentScheduler(agent_cfg, world, master_seed, mode="single")
    if cfg.kind == SchedulerKind.RANDOMK:
        return RandomKScheduler(world.k_channels, cfg.randomk_channels,
                                world.num_ues, master_seed)
    if cfg.kind == SchedulerKind.GBS:
        return GrantScheduler(world, cfg.grant_delay_sus)
    if cfg.kind == SchedulerKind.SPS:
        return SemiPersistentScheduler(traffic_cfg, world.su_duration,
                                       world.num_ues, world.k_channels)
    raise ValueError(f"scheduler.kind: unknown kind {cfg.kind}")
