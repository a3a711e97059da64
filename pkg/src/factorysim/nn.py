"""Small convolutional network over the feedback-history context, trained with
hand-rolled backprop and Adam.

Architecture: conv(10 filters 4x4, same) -> LeakyReLU -> maxpool 3x3/3
            -> conv(10 filters 3x3, same) -> LeakyReLU -> maxpool 3x3/3
            -> linear -> LeakyReLU (latent z) -> linear -> identity (K scores).

The latent z feeds the linear bandit heads; the identity output head exists
only so the representation can be trained by masked per-action MSE against
observed rewards.  Pooling uses floor division; a dimension that would floor
to zero is clamped to a single truncated window so short context histories
stay usable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)


def _pool_out(n: int, p: int) -> int:
    return max(1, n // p)


@dataclass(frozen=True)
class NetConfig:
    context_rows: int            # H, input height
    num_channels: int            # K, input width and output size
    conv1_filters: int = 10
    conv1_kernel: int = 4
    conv2_filters: int = 10
    conv2_kernel: int = 3
    pool: int = 3
    latent_dim: int = 10
    leaky_slope: float = 0.01
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs_per_update: int = 3
    minibatch_size: int = 64

    def validate(self) -> None:
        if self.context_rows < 1 or self.num_channels < 1:
            raise ValueError("net input dims must be >= 1")
        for name in ("conv1_filters", "conv1_kernel", "conv2_filters",
                     "conv2_kernel", "pool", "latent_dim", "minibatch_size",
                     "epochs_per_update"):
            if getattr(self, name) < 1:
                raise ValueError(f"net.{name} must be >= 1")
        (h1, w1), (h2, w2) = self.pooled_dims()
        assert min(h1, w1, h2, w2) >= 1

    def pooled_dims(self):
        h1 = _pool_out(self.context_rows, self.pool)
        w1 = _pool_out(self.num_channels, self.pool)
        h2 = _pool_out(h1, self.pool)
        w2 = _pool_out(w1, self.pool)
        return (h1, w1), (h2, w2)

    def flat_dim(self) -> int:
        (_, _), (h2, w2) = self.pooled_dims()
        return self.conv2_filters * h2 * w2


@dataclass
class Weights:
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0

    def copy(self) -> "Weights":
        return Weights(params={k: v.copy() for k, v in self.params.items()},
                       adam_m={k: v.copy() for k, v in self.adam_m.items()},
                       adam_v={k: v.copy() for k, v in self.adam_v.items()},
                       adam_t=self.adam_t)


PARAM_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")


def init_weights(cfg: NetConfig, rng: np.random.Generator) -> Weights:
    """He-uniform weights, zero biases."""
    cfg.validate()

    def he(shape, fan_in):
        lim = np.sqrt(6.0 / fan_in)
        return rng.uniform(-lim, lim, size=shape)

    k1, k2 = cfg.conv1_kernel, cfg.conv2_kernel
    params = {
        "w1": he((cfg.conv1_filters, 1, k1, k1), k1 * k1),
        "b1": np.zeros(cfg.conv1_filters),
        "w2": he((cfg.conv2_filters, cfg.conv1_filters, k2, k2),
                 cfg.conv1_filters * k2 * k2),
        "b2": np.zeros(cfg.conv2_filters),
        "w3": he((cfg.latent_dim, cfg.flat_dim()), cfg.flat_dim()),
        "b3": np.zeros(cfg.latent_dim),
        "w4": he((cfg.num_channels, cfg.latent_dim), cfg.latent_dim),
        "b4": np.zeros(cfg.num_channels),
    }
    w = Weights(params=params)
    w.adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    w.adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    return w


def _pad_same(x: np.ndarray, k: int) -> np.ndarray:
    pb, pa = (k - 1) // 2, k // 2
    return np.pad(x, ((0, 0), (0, 0), (pb, pa), (pb, pa)))


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x (B,C,H,W), w (F,C,k,k) -> (B,F,H,W), stride 1, same padding.
    k = w.shape[2]
    xp = _pad_same(x, k)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (B,C,H,W,k,k)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B,H,W,F)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b[None, :, None, None]


def _conv2d_grads(x: np.ndarray, w: np.ndarray, gout: np.ndarray):
    """Gradients of a same-padded stride-1 conv: (dw, db, dx)."""
    k = w.shape[2]
    pb, pa = (k - 1) // 2, k // 2
    xp = _pad_same(x, k)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))       # (B,C,H,W,k,k)
    dw = np.tensordot(gout, win, axes=([0, 2, 3], [0, 2, 3]))  # (F,C,k,k)
    db = gout.sum(axis=(0, 2, 3))
    gp = np.pad(gout, ((0, 0), (0, 0), (k - 1 - pb, k - 1 - pa),
                       (k - 1 - pb, k - 1 - pa)))
    gwin = sliding_window_view(gp, (k, k), axis=(2, 3))      # (B,F,H,W,k,k)
    wflip = w[:, :, ::-1, ::-1]
    dx = np.tensordot(gwin, wflip, axes=([1, 4, 5], [0, 2, 3]))  # (B,H,W,C)
    return dw, db, np.ascontiguousarray(dx.transpose(0, 3, 1, 2))


def _maxpool(x: np.ndarray, p: int):
    B, C, H, W = x.shape
    ho, wo = _pool_out(H, p), _pool_out(W, p)
    out = np.empty((B, C, ho, wo), dtype=x.dtype)
    arg_h = np.empty((B, C, ho, wo), dtype=np.intp)
    arg_w = np.empty((B, C, ho, wo), dtype=np.intp)
    for i in range(ho):
        hs, he = i * p, min(i * p + p, H)
        for j in range(wo):
            ws, we = j * p, min(j * p + p, W)
            win = x[:, :, hs:he, ws:we].reshape(B, C, -1)
            flat = win.argmax(axis=2)
            out[:, :, i, j] = np.take_along_axis(win, flat[:, :, None], axis=2)[:, :, 0]
            arg_h[:, :, i, j] = hs + flat // (we - ws)
            arg_w[:, :, i, j] = ws + flat % (we - ws)
    return out, (arg_h, arg_w)


def _maxpool_backward(gout: np.ndarray, args, shape) -> np.ndarray:
    arg_h, arg_w = args
    B, C = shape[0], shape[1]
    dx = np.zeros(shape, dtype=gout.dtype)
    b = np.arange(B)[:, None, None, None]
    c = np.arange(C)[None, :, None, None]
    np.add.at(dx, (b, c, arg_h, arg_w), gout)
    return dx


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def _leaky_grad(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre > 0, 1.0, slope)


def forward(cfg: NetConfig, w: Weights, x: np.ndarray, want_cache: bool = False):
    """Scores (B,K) and latent z (B,d) for contexts x (B,H,K)."""
    p = w.params
    x4 = np.asarray(x, dtype=np.float64)
    if x4.ndim == 2:
        x4 = x4[None]
    x4 = x4[:, None, :, :]

    pre1 = _conv2d(x4, p["w1"], p["b1"])
    act1 = _leaky(pre1, cfg.leaky_slope)
    pool1, arg1 = _maxpool(act1, cfg.pool)
    pre2 = _conv2d(pool1, p["w2"], p["b2"])
    act2 = _leaky(pre2, cfg.leaky_slope)
    pool2, arg2 = _maxpool(act2, cfg.pool)
    flat = pool2.reshape(pool2.shape[0], -1)
    pre3 = flat @ p["w3"].T + p["b3"]
    z = _leaky(pre3, cfg.leaky_slope)
    scores = z @ p["w4"].T + p["b4"]

    if not want_cache:
        return scores, z
    cache = dict(x4=x4, pre1=pre1, act1=act1, pool1=pool1, arg1=arg1,
                 pre2=pre2, act2=act2, pool2=pool2, arg2=arg2,
                 flat=flat, pre3=pre3, z=z)
    return scores, z, cache


def embed(cfg: NetConfig, w: Weights, x: np.ndarray) -> np.ndarray:
    _, z = forward(cfg, w, x)
    return z


def masked_loss(scores: np.ndarray, actions: np.ndarray, rewards: np.ndarray) -> float:
    """Mean squared error on the chosen-action outputs only."""
    picked = scores[np.arange(len(actions)), actions]
    return float(np.mean((picked - rewards) ** 2))


def loss_and_grads(cfg: NetConfig, w: Weights, x: np.ndarray,
                   actions: np.ndarray, rewards: np.ndarray):
    scores, _, cache = forward(cfg, w, x, want_cache=True)
    B = len(actions)
    idx = np.arange(B)
    picked = scores[idx, actions]
    loss = float(np.mean((picked - rewards) ** 2))

    p = w.params
    gscores = np.zeros_like(scores)
    gscores[idx, actions] = 2.0 * (picked - rewards) / B

    gz = gscores @ p["w4"]
    dw4 = gscores.T @ cache["z"]
    db4 = gscores.sum(axis=0)

    gpre3 = gz * _leaky_grad(cache["pre3"], cfg.leaky_slope)
    dw3 = gpre3.T @ cache["flat"]
    db3 = gpre3.sum(axis=0)
    gflat = gpre3 @ p["w3"]

    gpool2 = gflat.reshape(cache["pool2"].shape)
    gact2 = _maxpool_backward(gpool2, cache["arg2"], cache["act2"].shape)
    gpre2 = gact2 * _leaky_grad(cache["pre2"], cfg.leaky_slope)
    dw2, db2, gpool1 = _conv2d_grads(cache["pool1"], p["w2"], gpre2)

    gact1 = _maxpool_backward(gpool1, cache["arg1"], cache["act1"].shape)
    gpre1 = gact1 * _leaky_grad(cache["pre1"], cfg.leaky_slope)
    dw1, db1, _ = _conv2d_grads(cache["x4"], p["w1"], gpre1)

    grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2,
             "w3": dw3, "b3": db3, "w4": dw4, "b4": db4}
    return loss, grads


def adam_step(cfg: NetConfig, w: Weights, grads: dict) -> None:
    w.adam_t += 1
    t = w.adam_t
    b1, b2 = cfg.beta1, cfg.beta2
    for name in PARAM_ORDER:
        g = grads[name]
        m = w.adam_m[name]
        v = w.adam_v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        w.params[name] -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)


def full_loss(cfg: NetConfig, w: Weights, contexts: np.ndarray,
              actions: np.ndarray, rewards: np.ndarray, chunk: int = 512) -> float:
    total = 0.0
    for s in range(0, len(actions), chunk):
        scores, _ = forward(cfg, w, contexts[s:s + chunk])
        picked = scores[np.arange(scores.shape[0]), actions[s:s + chunk]]
        total += float(np.sum((picked - rewards[s:s + chunk]) ** 2))
    return total / len(actions)


def train_update(cfg: NetConfig, w: Weights, contexts: np.ndarray,
                 actions: np.ndarray, rewards: np.ndarray,
                 rng: np.random.Generator) -> list[float]:
    """A few epochs of Adam over the replay buffer; returns minibatch losses.

    Empty buffer leaves the weights untouched.  A worsened full-buffer loss is
    possible (small buffer, fresh regime) and only logged, never raised.
    """
    n = len(actions)
    if n == 0:
        return []
    actions = np.asarray(actions)
    rewards = np.asarray(rewards, dtype=np.float64)
    pre = full_loss(cfg, w, contexts, actions, rewards)
    losses = []
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for s in range(0, n, cfg.minibatch_size):
            sel = order[s:s + cfg.minibatch_size]
            loss, grads = loss_and_grads(cfg, w, contexts[sel], actions[sel], rewards[sel])
            adam_step(cfg, w, grads)
            losses.append(loss)
    post = full_loss(cfg, w, contexts, actions, rewards)
    if post > 1.10 * pre + 1e-12:
        logger.warning("train_update worsened buffer loss: %.6g -> %.6g", pre, post)
    return losses
