"""Few-step stochastic sampling from the context latent toward the next frame.

The moving state is the whole latent block, initialized at the context block
z^{0:k}.  Each of the N Euler steps adds drift (prediction - context)/N plus
scheduled noise; because the drift telescopes, an oracle predictor lands on
the true next block exactly regardless of N.  The returned latent is the last
slot of the final block, i.e. the new frame.
"""

import time
from dataclasses import dataclass

import numpy as np

from .nn import NonFiniteError
from .process import as_latent_block, noise_schedule
from .rng import STREAM_SAMPLER, make_rng


@dataclass(frozen=True)
class SamplerConfig:
    num_steps: int = 5
    t_floor: float = 1e-3
    stochastic: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if not (0.0 < self.t_floor < 0.5):
            raise ValueError(f"t_floor must lie in (0, 0.5), got {self.t_floor}")


@dataclass
class Rollout:
    """Autoregressive prediction: one latent per requested future frame."""

    latents: np.ndarray       # (horizon, D)
    step_counts: np.ndarray   # (horizon,) sampler steps spent per frame
    wall_ms: np.ndarray       # (horizon,) wall time per frame


def sample_next_batch(predictor, contexts, cfg, rng=None):
    """Vectorized sampler: (B, k+1, D) context blocks -> (B, D) next latents.

    Per step i (1-based, d = 1/N): the drift evaluates the predictor at the
    previous state and time (i-1)/N; the noise term is g(min(i/N, 1-t_floor))
    times a N(0, I*d) draw, suppressed entirely on the first step.
    """
    contexts = np.asarray(contexts, dtype=np.float64)
    if contexts.ndim != 3:
        raise ValueError(f"contexts must have shape (B, k+1, D), got {contexts.shape}")
    if rng is None:
        rng = make_rng(cfg.seed, STREAM_SAMPLER)
    n = cfg.num_steps
    d = 1.0 / n
    state = contexts.copy()
    for i in range(1, n + 1):
        t_prev = (i - 1) / n
        pred = predictor.forward_batch(state, [t_prev] * len(state))
        state = state + (pred - contexts) * d
        if cfg.stochastic and i > 1:
            g = noise_schedule(min(i / n, 1.0 - cfg.t_floor))
            state = state + g * rng.normal(0.0, np.sqrt(d), size=state.shape)
        if not np.all(np.isfinite(state)):
            raise NonFiniteError(f"non-finite sampler state at step {i} of {n}")
    return state[:, -1, :]


def sample_next(predictor, context, cfg, rng=None):
    """Draw the next-frame latent from one context block z^{0:k}."""
    context = as_latent_block(context, "context")
    return sample_next_batch(predictor, context[None], cfg, rng)[0]


def rollout(predictor, context, horizon, cfg):
    """Autoregressive multi-frame prediction with FIFO context shifting.

    Each frame uses its own Philox substream keyed by (seed, frame index),
    so rollouts are reproducible and frames are decoupled.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    context = as_latent_block(context, "context")
    latents = np.empty((horizon, context.shape[1]))
    step_counts = np.empty(horizon, dtype=np.int64)
    wall_ms = np.empty(horizon)
    window = context.copy()
    for m in range(horizon):
        rng = make_rng(cfg.seed, STREAM_SAMPLER, m)
        start = time.perf_counter()
        z = sample_next_batch(predictor, window[None], cfg, rng)[0]
        wall_ms[m] = (time.perf_counter() - start) * 1e3
        latents[m] = z
        step_counts[m] = cfg.num_steps
        window = np.concatenate([window[1:], z[None]], axis=0)
    return Rollout(latents, step_counts, wall_ms)


def noise_variance_sum(cfg):
    """Analytic per-coordinate variance added by a full sampler pass.

    Matches the implementation: no noise on step 1, g evaluated at
    min(i/N, 1 - t_floor), each draw has variance 1/N.
    """
    n = cfg.num_steps
    total = 0.0
    for i in range(2, n + 1):
        g = noise_schedule(min(i / n, 1.0 - cfg.t_floor))
        total += g * g / n
    return total
