"""Dense x-start predictor over noisy latent blocks.

The network consumes a flattened block of k+1 latents concatenated with a
sinusoidal embedding of the process time and returns the predicted clean
shifted block.  Gradients are exact reverse-mode derivatives of the weighted
squared-error training loss.
"""

import math
from dataclasses import dataclass

import numpy as np

from .nn import Mlp, NonFiniteError
from .process import ProcessTime, as_latent_block
from .rng import STREAM_PARAM_INIT


class ShapeMismatchError(ValueError):
    """Input block does not match the network's trained geometry."""


@dataclass(frozen=True)
class TimeEmbedding:
    """Sinusoidal embedding config: output dimension is 2*num_frequencies."""

    num_frequencies: int = 16
    max_freq_log2: float = 20.0

    def __post_init__(self):
        if self.num_frequencies < 1:
            raise ValueError("num_frequencies must be >= 1")

    @property
    def dim(self):
        return 2 * self.num_frequencies

    def frequencies(self):
        """Log-spaced frequencies from 1 to 2**max_freq_log2."""
        if self.num_frequencies == 1:
            return np.ones(1)
        exponents = np.linspace(0.0, self.max_freq_log2, self.num_frequencies)
        return np.exp2(exponents)


def time_embed(t, cfg):
    """[sin(2*pi*f_i*t) ..., cos(2*pi*f_i*t) ...], every entry in [-1, 1]."""
    tv = t.t if isinstance(t, ProcessTime) else ProcessTime(float(t)).t
    phase = 2.0 * math.pi * cfg.frequencies() * tv
    return np.concatenate([np.sin(phase), np.cos(phase)])


def time_embed_batch(ts, cfg):
    """Embeddings for a sequence of times, shape (len(ts), cfg.dim)."""
    tv = np.array([t.t if isinstance(t, ProcessTime) else ProcessTime(float(t)).t
                   for t in ts])
    phase = 2.0 * math.pi * tv[:, None] * cfg.frequencies()[None, :]
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)


class Predictor:
    """MLP from (noisy block, time) to the predicted clean shifted block."""

    def __init__(self, block_frames, latent_dim, hidden=(128, 128),
                 embed=TimeEmbedding(), seed=0):
        if block_frames < 1 or latent_dim < 1:
            raise ValueError("block_frames and latent_dim must be >= 1")
        self.block_frames = int(block_frames)
        self.latent_dim = int(latent_dim)
        self.embed = embed
        self.block_dim = self.block_frames * self.latent_dim
        self.seed = int(seed)
        self.net = Mlp(
            in_dim=self.block_dim + embed.dim,
            out_dim=self.block_dim,
            hidden=hidden,
            seed=seed,
            stream=STREAM_PARAM_INIT,
            zero_init_last=True,
        )

    @property
    def hidden(self):
        return self.net.hidden

    def size(self):
        return self.net.size()

    def param_arrays(self):
        return self.net.param_arrays()

    def set_param_arrays(self, arrays):
        self.net.set_param_arrays(arrays)

    def _check_block(self, block, name="block"):
        block = as_latent_block(block, name)
        if block.shape != (self.block_frames, self.latent_dim):
            raise ShapeMismatchError(
                f"{name} shape {block.shape} != ({self.block_frames}, {self.latent_dim})"
            )
        return block

    def _features(self, blocks, ts):
        flat = np.asarray(blocks, dtype=np.float64).reshape(len(blocks), -1)
        return np.concatenate([flat, time_embed_batch(ts, self.embed)], axis=1)

    def forward_batch(self, blocks, ts):
        """Predict clean blocks for a batch: (B, k+1, D) -> (B, k+1, D)."""
        blocks = np.asarray(blocks, dtype=np.float64)
        out = self.net.forward_batch(self._features(blocks, ts))
        return out.reshape(blocks.shape)

    def forward(self, block, t):
        """Predicted clean shifted block for one noisy block at time t."""
        block = self._check_block(block)
        return self.forward_batch(block[None], [t])[0]

    def backward_batch(self, blocks, ts, targets, weights):
        """Mean weighted squared error over a batch plus exact gradients.

        loss = mean_b weights[b] * sum((targets[b] - pred[b])**2).
        """
        blocks = np.asarray(blocks, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        batch = blocks.shape[0]
        out, cache = self.net.forward_cached(self._features(blocks, ts))
        self.net.check_finite(out, cache)

        resid = out - targets.reshape(batch, -1)
        per_example = weights * np.sum(resid * resid, axis=1)
        loss = float(np.mean(per_example))
        if not math.isfinite(loss):
            raise NonFiniteError("non-finite loss after output layer")

        grad_out = (2.0 / batch) * weights[:, None] * resid
        grads, _ = self.net.vjp(cache, grad_out)
        return loss, grads

    def backward(self, block, t, target, weight):
        """Single-example weighted squared error loss and exact gradients."""
        if not weight > 0.0:
            raise ValueError(f"weight must be positive, got {weight}")
        block = self._check_block(block)
        target = self._check_block(target, "target")
        return self.backward_batch(block[None], [t], target[None], [float(weight)])

    def per_example_losses(self, blocks, ts, targets, weights):
        """Weighted squared errors per example, no gradients."""
        blocks = np.asarray(blocks, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        preds = self.forward_batch(blocks, ts)
        resid = (preds - targets).reshape(blocks.shape[0], -1)
        return np.asarray(weights, dtype=np.float64) * np.sum(resid * resid, axis=1)

    def lipschitz_bound(self):
        """Bound L with |f(x+d) - f(x)| <= L*|d| for the block input."""
        return self.net.lipschitz_bound()
