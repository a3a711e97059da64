"""Per-action Bayesian linear regression heads for Thompson sampling.

Each action k keeps a normal-inverse-gamma posterior over (beta_k, nu_k^2):
precision Phi_k starts at lambda*I, the mean at zero, and the noise variance
at InvGamma(a0, b0).  Updates are exact rank-one refreshes; the noise scale
update uses the telescoped quadratic form so no per-sample history is needed.
The sampling covariance carries a global multiplier g = gamma^t that shrinks
by gamma once per decision, annealing exploration as the agents settle into a
joint allocation; g survives posterior rebuilds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LtsConfig:
    num_actions: int
    latent_dim: int
    prior_scale: float = 0.25      # lambda, ridge prior precision
    noise_shape: float = 6.0       # a0
    noise_scale: float = 6.0       # b0
    variance_decay: float = 0.9999  # gamma, per-decision covariance shrink

    def validate(self) -> None:
        if self.num_actions < 1 or self.latent_dim < 1:
            raise ValueError("bandit dims must be >= 1")
        if self.prior_scale <= 0:
            raise ValueError("bandit.prior_scale must be positive")
        if self.noise_shape <= 1 or self.noise_scale <= 0:
            raise ValueError("bandit noise prior must have a0 > 1, b0 > 0")
        if not 0 < self.variance_decay <= 1:
            raise ValueError("bandit.variance_decay must be in (0, 1]")


@dataclass
class LtsState:
    precision: np.ndarray   # (K, d, d) = lambda*I + sum z z^T
    xty: np.ndarray         # (K, d)    = sum z r
    mean: np.ndarray        # (K, d)    ridge solution
    chol: np.ndarray        # (K, d, d) lower Cholesky of precision
    a: np.ndarray           # (K,) noise shape
    b: np.ndarray           # (K,) noise scale
    counts: np.ndarray      # (K,) updates per action
    g: float = 1.0          # covariance multiplier, gamma^decisions
    decisions: int = 0


def init_state(cfg: LtsConfig) -> LtsState:
    cfg.validate()
    K, d = cfg.num_actions, cfg.latent_dim
    eye = np.eye(d)
    return LtsState(
        precision=np.tile(cfg.prior_scale * eye, (K, 1, 1)),
        xty=np.zeros((K, d)),
        mean=np.zeros((K, d)),
        chol=np.tile(np.sqrt(cfg.prior_scale) * eye, (K, 1, 1)),
        a=np.full(K, cfg.noise_shape),
        b=np.full(K, cfg.noise_scale),
        counts=np.zeros(K, dtype=np.int64),
    )


def _mean_from_chol(chol: np.ndarray, xty: np.ndarray) -> np.ndarray:
    # Solve (L L^T) mean = xty with two triangular solves.
    y = np.linalg.solve(chol, xty)
    return np.linalg.solve(chol.T, y)


def update(state: LtsState, z: np.ndarray, k: int, r: float) -> None:
    """Fold one (latent, action, reward) observation into the posterior."""
    z = np.asarray(z, dtype=np.float64)
    old_quad = float(state.mean[k] @ state.xty[k])
    state.precision[k] += np.outer(z, z)
    state.xty[k] += r * z
    state.chol[k] = np.linalg.cholesky(state.precision[k])
    state.mean[k] = _mean_from_chol(state.chol[k], state.xty[k])
    new_quad = float(state.mean[k] @ state.xty[k])
    state.a[k] += 0.5
    state.b[k] += 0.5 * (r * r + old_quad - new_quad)
    state.counts[k] += 1


def sample_betas(cfg: LtsConfig, state: LtsState,
                 rng: np.random.Generator) -> np.ndarray:
    """One posterior draw of beta per action; advances the decay once.

    Draw order is fixed (noise variances first, then the normal block) so a
    given generator state always yields the same betas.
    """
    K, d = cfg.num_actions, cfg.latent_dim
    nu2 = state.b / rng.standard_gamma(state.a)         # InvGamma(a, b)
    xi = rng.standard_normal((K, d))
    # beta = mean + sqrt(nu2 g) L^-T xi has covariance nu2 g * precision^-1
    lt = np.transpose(state.chol, (0, 2, 1))
    y = np.linalg.solve(lt, xi[..., None])[..., 0]
    betas = state.mean + np.sqrt(nu2 * state.g)[:, None] * y
    state.g *= cfg.variance_decay
    state.decisions += 1
    return betas


def rebuild(cfg: LtsConfig, history, g: float, decisions: int) -> LtsState:
    """Fresh posterior from re-encoded history, preserving the decay state.

    history is an iterable of (z, k, r) in chronological order.
    """
    state = init_state(cfg)
    for z, k, r in history:
        update(state, z, int(k), float(r))
    state.g = g
    state.decisions = decisions
    return state
