"""Per-UE scheduling agent: combinatorial neural-linear Thompson sampling.

Each agent sees only the broadcast per-channel feedback of past SUs.  The
last H rows are encoded into a context image, the network embeds it into a
latent z, and one beta per channel is sampled from the linear posterior.
The super-action is every channel whose sampled score z beta_k exceeds the
threshold epsilon (falling back to the best channel so a transmitting agent
always uses at least one).  Every train_interval decisions the network is
refit on the replay buffer and the posterior is rebuilt from re-encoded
history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bandit, nn

# Feedback encoding: own success / other success / unused / outage / collision.
ENC_OWN = 1.0
ENC_OTHER = 0.5
ENC_UNUSED = 0.0
ENC_OUTAGE = -0.5
ENC_COLLISION = -1.0


@dataclass(frozen=True)
class AgentConfig:
    context_rows: int = 10        # H, feedback rows per context
    include_queue_row: bool = False  # append own queue occupancy as a row
    epsilon: float = 0.0          # super-action inclusion threshold
    buffer_capacity: int = 4096
    train_interval: int = 100     # O, decisions between refits
    latent_dim: int = 10
    prior_scale: float = 0.25
    noise_shape: float = 6.0
    noise_scale: float = 6.0
    variance_decay: float = 0.9999
    leaky_slope: float = 0.01
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs_per_update: int = 3
    minibatch_size: int = 64

    def validate(self) -> None:
        if self.context_rows < 1:
            raise ValueError("agent.context_rows must be >= 1")
        if self.buffer_capacity < 1:
            raise ValueError("agent.buffer_capacity must be >= 1")
        if self.train_interval < 1:
            raise ValueError("agent.train_interval must be >= 1")

    @property
    def input_rows(self) -> int:
        return self.context_rows + (1 if self.include_queue_row else 0)

    def net_config(self, num_channels: int) -> nn.NetConfig:
        return nn.NetConfig(
            context_rows=self.input_rows, num_channels=num_channels,
            latent_dim=self.latent_dim, leaky_slope=self.leaky_slope,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            epochs_per_update=self.epochs_per_update,
            minibatch_size=self.minibatch_size)

    def lts_config(self, num_channels: int) -> bandit.LtsConfig:
        return bandit.LtsConfig(
            num_actions=num_channels, latent_dim=self.latent_dim,
            prior_scale=self.prior_scale, noise_shape=self.noise_shape,
            noise_scale=self.noise_scale, variance_decay=self.variance_decay)


def encode_context(window: np.ndarray, ue: int) -> np.ndarray:
    """Map a (H, K) window of feedback outcomes to the agent's context image.

    Outcome codes: 0 unused, -1 outage, -2 collision, i >= 1 success of UE
    i-1.  Row 0 is the oldest SU.
    """
    window = np.asarray(window)
    own = ue + 1
    out = np.zeros(window.shape, dtype=np.float64)
    out[window == own] = ENC_OWN
    out[(window > 0) & (window != own)] = ENC_OTHER
    out[window == -1] = ENC_OUTAGE
    out[window == -2] = ENC_COLLISION
    return out


class Agent:
    """One UE's scheduler state: network, posterior, replay buffer."""

    def __init__(self, cfg: AgentConfig, ue: int, num_channels: int,
                 rng: np.random.Generator, mode: str = "multi"):
        cfg.validate()
        if mode not in ("multi", "single"):
            raise ValueError("agent mode must be multi or single")
        self.cfg = cfg
        self.ue = ue
        self.k = num_channels
        self.mode = mode
        self.rng = rng
        self.net_cfg = cfg.net_config(num_channels)
        self.lts_cfg = cfg.lts_config(num_channels)
        self.weights = nn.init_weights(self.net_cfg, rng)
        self.lts = bandit.init_state(self.lts_cfg)

        c = cfg.buffer_capacity
        self._buf_ctx = np.zeros((c, cfg.input_rows, num_channels))
        self._buf_act = np.zeros(c, dtype=np.int64)
        self._buf_rew = np.zeros(c)
        self._buf_n = 0
        self._buf_head = 0
        self.counter = 0      # decisions since last refit, wraps at train_interval
        self.decisions = 0
        self._pending = None  # (context, z) between select and observe

    def select(self, context: np.ndarray) -> list[int]:
        """Sample betas and pick the super-action for this SU."""
        z = nn.embed(self.net_cfg, self.weights, context[None])[0]
        betas = bandit.sample_betas(self.lts_cfg, self.lts, self.rng)
        scores = betas @ z
        if self.mode == "single":
            theta = [int(np.argmax(scores))]
        else:
            theta = [int(k) for k in np.nonzero(scores > self.cfg.epsilon)[0]]
            if not theta:
                theta = [int(np.argmax(scores))]
        self._pending = (context, z)
        return theta

    def observe(self, channels, rewards):
        """Store per-channel rewards for the pending decision; maybe refit.

        channels are the channels that actually carried the transmission
        (a subset of the selected super-action when the queue ran short).
        Returns the refit's minibatch losses, or None.
        """
        if self._pending is None:
            raise RuntimeError("observe without a pending select")
        context, z = self._pending
        self._pending = None
        for k, r in zip(channels, rewards):
            self._push(context, int(k), float(r))
            bandit.update(self.lts, z, int(k), float(r))
        self.counter += 1
        self.decisions += 1
        if self.counter >= self.cfg.train_interval:
            return self._refit()
        return None

    def _push(self, context, k, r):
        i = self._buf_head
        self._buf_ctx[i] = context
        self._buf_act[i] = k
        self._buf_rew[i] = r
        self._buf_head = (i + 1) % self.cfg.buffer_capacity
        self._buf_n = min(self._buf_n + 1, self.cfg.buffer_capacity)

    def buffer_arrays(self):
        """Buffer contents in insertion order (oldest first)."""
        n, head, c = self._buf_n, self._buf_head, self.cfg.buffer_capacity
        if n < c:
            sl = slice(0, n)
            return self._buf_ctx[sl], self._buf_act[sl], self._buf_rew[sl]
        order = np.concatenate([np.arange(head, c), np.arange(0, head)])
        return self._buf_ctx[order], self._buf_act[order], self._buf_rew[order]

    def _refit(self):
        ctx, act, rew = self.buffer_arrays()
        losses = nn.train_update(self.net_cfg, self.weights, ctx, act, rew, self.rng)
        z_all = np.concatenate([
            nn.embed(self.net_cfg, self.weights, ctx[s:s + 512])
            for s in range(0, len(act), 512)
        ])
        self.lts = bandit.rebuild(self.lts_cfg, zip(z_all, act, rew),
                                  g=self.lts.g, decisions=self.lts.decisions)
        self.counter = 0
        return losses

    def save_checkpoint(self, path) -> None:
        np.savez_compressed(
            path, format_version=1, ue=self.ue, mode=self.mode,
            decisions=self.decisions, counter=self.counter,
            lts_precision=self.lts.precision, lts_xty=self.lts.xty,
            lts_mean=self.lts.mean, lts_a=self.lts.a, lts_b=self.lts.b,
            lts_counts=self.lts.counts, lts_g=self.lts.g,
            adam_t=self.weights.adam_t,
            **{f"param_{k}": v for k, v in self.weights.params.items()})
