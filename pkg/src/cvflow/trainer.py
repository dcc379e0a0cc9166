"""Training loop for the flow predictor.

Each step samples aligned block pairs from the corpus, draws one process
time and one noise vector per example, builds the noisy interpolant, and
takes an AdamW step on the weighted x-start regression loss.  Per-step
randomness comes from a Philox substream keyed by the step index, so runs
are bit-reproducible and checkpoint resume replays the identical stream.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .nn import NonFiniteError
from .optim import OptimState, adamw_step, clip_grad_norm, lr_at
from .process import ScheduleConstants, interpolate, loss_weight
from .rng import STREAM_TRAIN, make_rng


class MisalignedBlocksError(ValueError):
    """The target block is not the context block shifted by one frame."""


class TrainAbortError(RuntimeError):
    """Training hit a non-finite loss; message carries (t, example index)."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    total_steps: int = 4000
    t_grid: int = 100
    t_floor: float = 1e-3
    weight_cap: float = 100.0
    discrete_t: bool = False
    seed: int = 0
    eval_every: int = 1
    grad_clip: float = 0.0  # 0 disables clipping

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.t_grid < 2:
            raise ValueError("t_grid must be >= 2")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def schedule_constants(self):
        return ScheduleConstants(t_floor=self.t_floor, weight_cap=self.weight_cap)


@dataclass(frozen=True)
class TrainRecord:
    step: int
    loss: float
    lr: float
    wall_ms: float


class BlockPairDataset:
    """Aligned (z^{j:j+k}, z^{j+1:j+k+1}) pairs from a latent corpus.

    Wraps an array of latent trajectories (num_videos, length, D); pairs are
    drawn uniformly over (video, start) positions, which revisits the corpus
    indefinitely.
    """

    def __init__(self, latents, block_frames):
        self.latents = np.asarray(latents, dtype=np.float64)
        if self.latents.ndim != 3:
            raise ValueError(f"latents must be (videos, length, D), got {self.latents.shape}")
        self.block_frames = int(block_frames)
        if self.block_frames < 1:
            raise ValueError("block_frames must be >= 1")
        if self.latents.shape[1] < self.block_frames + 1:
            raise ValueError(
                f"videos of length {self.latents.shape[1]} cannot yield aligned "
                f"pairs of {self.block_frames}-frame blocks"
            )

    @property
    def latent_dim(self):
        return self.latents.shape[2]

    def sample_pairs(self, rng, batch):
        """Returns (blocks_j, blocks_j1), each (batch, block_frames, D)."""
        n_videos, length, _ = self.latents.shape
        vids = rng.integers(0, n_videos, size=batch)
        starts = rng.integers(0, length - self.block_frames, size=batch)
        idx = starts[:, None] + np.arange(self.block_frames)[None, :]
        blocks_j = self.latents[vids[:, None], idx]
        blocks_j1 = self.latents[vids[:, None], idx + 1]
        return blocks_j, blocks_j1


def make_training_example(z_block_j, z_block_j1, t, eps, constants=ScheduleConstants()):
    """Noisy interpolant input, clean shifted target, and its loss weight."""
    z_block_j = np.asarray(z_block_j, dtype=np.float64)
    z_block_j1 = np.asarray(z_block_j1, dtype=np.float64)
    if z_block_j.shape != z_block_j1.shape:
        raise MisalignedBlocksError(
            f"block shapes disagree: {z_block_j.shape} vs {z_block_j1.shape}"
        )
    if not np.array_equal(z_block_j[1:], z_block_j1[:-1]):
        raise MisalignedBlocksError("target block is not the context block shifted by one")
    inp = interpolate(z_block_j, z_block_j1, t, eps)
    return inp, z_block_j1, loss_weight(t, constants)


def _draw_times(rng, batch, config):
    if config.discrete_t:
        i = rng.integers(1, config.t_grid + 1, size=batch)
        return np.clip(i / config.t_grid, config.t_floor, 1.0 - config.t_floor)
    return rng.uniform(config.t_floor, 1.0 - config.t_floor, size=batch)


def train_step(predictor, opt_state, schedule, blocks_j, blocks_j1, rng, config):
    """One gradient step on a batch of aligned block pairs."""
    start = time.perf_counter()
    batch = len(blocks_j)
    if batch == 0:
        raise ValueError("batch must be non-empty")
    constants = config.schedule_constants()
    ts = _draw_times(rng, batch, config)
    eps = rng.standard_normal(blocks_j.shape)
    inputs = np.empty_like(np.asarray(blocks_j, dtype=np.float64))
    weights = np.empty(batch)
    for b in range(batch):
        inputs[b], _, weights[b] = make_training_example(
            blocks_j[b], blocks_j1[b], ts[b], eps[b], constants
        )
    targets = np.asarray(blocks_j1, dtype=np.float64)
    try:
        loss, grads = predictor.backward_batch(inputs, ts, targets, weights)
    except NonFiniteError as err:
        per_example = predictor.per_example_losses(inputs, ts, targets, weights)
        bad = np.flatnonzero(~np.isfinite(per_example))
        idx = int(bad[0]) if len(bad) else -1
        t_bad = ts[idx] if idx >= 0 else float("nan")
        raise TrainAbortError(
            f"non-finite batch loss (example {idx}, t={t_bad:.6f}): {err}"
        ) from err
    if config.grad_clip > 0.0:
        grads = clip_grad_norm(grads, config.grad_clip)
    lr = lr_at(opt_state.step_count, schedule)
    params = adamw_step(predictor.param_arrays(), grads, opt_state, lr)
    predictor.set_param_arrays(params)
    wall_ms = (time.perf_counter() - start) * 1e3
    return TrainRecord(step=opt_state.step_count, loss=loss, lr=lr, wall_ms=wall_ms)


def train_loop(config, dataset, predictor, schedule, opt_state=None):
    """Run config.total_steps steps; returns (records, opt_state).

    Records are emitted every eval_every steps (and always for the final
    step).  Resuming with a checkpointed opt_state replays the exact
    remaining per-step noise streams.
    """
    if opt_state is None:
        opt_state = OptimState.for_params(predictor.param_arrays())
    records = []
    start_step = opt_state.step_count
    for step in range(start_step, config.total_steps):
        rng = make_rng(config.seed, STREAM_TRAIN, step)
        blocks_j, blocks_j1 = dataset.sample_pairs(rng, config.batch_size)
        record = train_step(predictor, opt_state, schedule, blocks_j, blocks_j1, rng, config)
        if not math.isfinite(record.loss):
            raise TrainAbortError(f"non-finite loss at step {record.step}")
        if record.step % config.eval_every == 0 or record.step == config.total_steps:
            records.append(record)
    return records, opt_state
