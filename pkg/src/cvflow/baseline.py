"""Gaussian-start denoising diffusion baseline for next-latent prediction.

The comparator for the step-efficiency claim: a conventional DDPM that
diffuses the next-frame latent to pure noise and samples it back with an
ancestral chain conditioned on the context block.  Backbone family, width
and depth match the flow predictor so the comparison isolates the choice of
process, not capacity.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .nn import Mlp, NonFiniteError
from .optim import LrSchedule, OptimState, adamw_step, lr_at
from .predictor import TimeEmbedding, time_embed_batch
from .rng import STREAM_BASELINE, make_rng
from .trainer import BlockPairDataset, TrainAbortError, TrainRecord


class DiffusionSchedule:
    """Linear-beta variance schedule with cached alpha-bar products."""

    def __init__(self, t_steps=100, beta_min=1e-4, beta_max=0.02):
        if t_steps < 1:
            raise ValueError("t_steps must be >= 1")
        self.t_steps = int(t_steps)
        self.betas = np.linspace(beta_min, beta_max, self.t_steps)
        if np.any(self.betas <= 0.0) or np.any(self.betas >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        # alpha_bar[s] for s = 0..t_steps, with alpha_bar[0] = 1 (clean data)
        self.alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")

    def check_step(self, step):
        if not 1 <= step <= self.t_steps:
            raise ValueError(f"step {step} outside [1, {self.t_steps}]")


def diffuse(z0, step, eps, schedule):
    """Forward marginal sqrt(abar_t)*z0 + sqrt(1-abar_t)*eps at step t."""
    schedule.check_step(step)
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise ValueError(f"z0 shape {z0.shape} != eps shape {eps.shape}")
    abar = schedule.alpha_bar[step]
    return math.sqrt(abar) * z0 + math.sqrt(1.0 - abar) * eps


class BaselinePredictor:
    """x-start network: (context block, noisy next latent, step) -> clean latent."""

    def __init__(self, context_frames, latent_dim, hidden=(128, 128),
                 embed=TimeEmbedding(), schedule=None, seed=0):
        self.context_frames = int(context_frames)
        self.latent_dim = int(latent_dim)
        self.embed = embed
        self.schedule = schedule if schedule is not None else DiffusionSchedule()
        self.net = Mlp(
            in_dim=(self.context_frames + 1) * self.latent_dim + embed.dim,
            out_dim=self.latent_dim,
            hidden=hidden,
            seed=seed,
            stream=STREAM_BASELINE,
            zero_init_last=True,
        )

    def size(self):
        return self.net.size()

    def param_arrays(self):
        return self.net.param_arrays()

    def set_param_arrays(self, arrays):
        self.net.set_param_arrays(arrays)

    def features(self, contexts, noisy, steps):
        contexts = np.asarray(contexts, dtype=np.float64)
        noisy = np.asarray(noisy, dtype=np.float64)
        flat = contexts.reshape(len(contexts), -1)
        frac = np.asarray(steps, dtype=np.float64) / self.schedule.t_steps
        emb = time_embed_batch(frac, self.embed)
        return np.concatenate([flat, noisy, emb], axis=1)

    def predict_x0(self, contexts, noisy, steps):
        """Predicted clean next latents, (B, D)."""
        return self.net.forward_batch(self.features(contexts, noisy, steps))


def train_baseline(latents, context_frames, config, schedule=None,
                   hidden=(128, 128), embed=TimeEmbedding(), lr_schedule=None):
    """Train the conditional x-start denoiser on a latent corpus.

    Uses the same pair sampling, optimizer and LR schedule family as the
    flow trainer; the loss is plain (uniform-weight) squared error on the
    clean next latent.  Returns (predictor, records).
    """
    dataset = BlockPairDataset(latents, context_frames)
    model = BaselinePredictor(context_frames, dataset.latent_dim, hidden=hidden,
                              embed=embed, schedule=schedule, seed=config.seed)
    sched = model.schedule
    if lr_schedule is None:
        lr_schedule = LrSchedule(total_steps=max(config.total_steps, 2))
    opt = OptimState.for_params(model.param_arrays())
    records = []
    for step_i in range(config.total_steps):
        start = time.perf_counter()
        rng = make_rng(config.seed, STREAM_BASELINE, step_i)
        blocks_j, blocks_j1 = dataset.sample_pairs(rng, config.batch_size)
        contexts = blocks_j
        targets = blocks_j1[:, -1, :]
        steps = rng.integers(1, sched.t_steps + 1, size=len(targets))
        eps = rng.standard_normal(targets.shape)
        abar = sched.alpha_bar[steps][:, None]
        noisy = np.sqrt(abar) * targets + np.sqrt(1.0 - abar) * eps

        feats = model.features(contexts, noisy, steps)
        out, cache = model.net.forward_cached(feats)
        try:
            model.net.check_finite(out, cache)
        except NonFiniteError as err:
            raise TrainAbortError(f"baseline: {err} at step {step_i}") from err
        resid = out - targets
        loss = float(np.mean(np.sum(resid * resid, axis=1)))
        grad_out = (2.0 / len(targets)) * resid
        grads, _ = model.net.vjp(cache, grad_out)
        lr = lr_at(opt.step_count, lr_schedule)
        model.set_param_arrays(adamw_step(model.param_arrays(), grads, opt, lr))
        wall_ms = (time.perf_counter() - start) * 1e3
        records.append(TrainRecord(step=opt.step_count, loss=loss, lr=lr, wall_ms=wall_ms))
    return model, records


def subsampled_steps(t_steps, steps_used):
    """Descending stride-subsampled timestep ladder ending above 0."""
    if not 1 <= steps_used <= t_steps:
        raise ValueError(f"steps_used {steps_used} outside [1, {t_steps}]")
    taus = [round(t_steps * i / steps_used) for i in range(steps_used, 0, -1)]
    taus = sorted(set(int(t) for t in taus if t >= 1), reverse=True)
    return taus


def sample_baseline_batch(model, contexts, steps_used, rng=None, seed=0):
    """Ancestral sampling from N(0, I) down the subsampled step ladder.

    Transitions use the alpha-bar-only posterior q(z_s | z_t, x0-hat), which
    stays exact for arbitrary step subsets; the final hop to s=0 has zero
    variance because alpha_bar[0] = 1.
    """
    contexts = np.asarray(contexts, dtype=np.float64)
    if rng is None:
        rng = make_rng(seed, STREAM_BASELINE)
    sched = model.schedule
    taus = subsampled_steps(sched.t_steps, steps_used)
    z = rng.standard_normal((len(contexts), model.latent_dim))
    for i, t_cur in enumerate(taus):
        s_next = taus[i + 1] if i + 1 < len(taus) else 0
        x0 = model.predict_x0(contexts, z, np.full(len(contexts), t_cur))
        ab_t = sched.alpha_bar[t_cur]
        ab_s = sched.alpha_bar[s_next]
        ratio = ab_t / ab_s
        mean = (
            math.sqrt(ab_s) * (1.0 - ratio) * x0
            + math.sqrt(ratio) * (1.0 - ab_s) * z
        ) / (1.0 - ab_t)
        var = (1.0 - ab_s) * (1.0 - ratio) / (1.0 - ab_t)
        z = mean
        if var > 0.0:
            z = z + math.sqrt(var) * rng.standard_normal(z.shape)
        if not np.all(np.isfinite(z)):
            raise NonFiniteError(f"non-finite baseline state at ladder step {i}")
    return z


def sample_baseline(model, context, steps_used, rng=None, seed=0):
    """Sample one next-frame latent from one context block."""
    context = np.asarray(context, dtype=np.float64)
    return sample_baseline_batch(model, context[None], steps_used, rng=rng, seed=seed)[0]
