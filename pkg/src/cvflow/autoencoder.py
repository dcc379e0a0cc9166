"""Small trainable autoencoder between pixel frames and latent vectors.

Encoder and decoder are dense SiLU networks trained jointly on mean squared
reconstruction error.  After training, a frozen affine standardization layer
is fitted so encoded latents have zero mean and unit variance per coordinate
over the training corpus; the flow stage depends on that absolute scale
because its noise schedule is not adaptive.
"""

import math
from dataclasses import dataclass

import numpy as np

from .nn import Mlp
from .optim import LrSchedule, OptimState, adamw_step, lr_at
from .rng import STREAM_AE, make_rng


class FrameShapeError(ValueError):
    """Frame does not match the autoencoder's pixel geometry."""


class DivergenceError(RuntimeError):
    """Training loss rose an order of magnitude above its running minimum."""


@dataclass(frozen=True)
class AeConfig:
    latent_dim: int = 16
    hidden: tuple = (192,)
    kind: str = "mlp"  # "mlp" or "linear" (no hidden layers)
    train_steps: int = 4000
    batch_size: int = 64
    max_lr: float = 2e-3
    warmup_steps: int = 100
    weight_decay: float = 1e-5
    seed: int = 2

    def __post_init__(self):
        if self.kind not in ("mlp", "linear"):
            raise ValueError(f"kind must be 'mlp' or 'linear', got {self.kind!r}")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")

    def hidden_layers(self):
        return () if self.kind == "linear" else tuple(self.hidden)


class Autoencoder:
    """Encoder/decoder pair plus the frozen latent standardization affine."""

    def __init__(self, frame_shape, latent_dim, hidden=(192,), seed=2):
        self.frame_shape = tuple(int(s) for s in frame_shape)  # (C, H, W)
        self.latent_dim = int(latent_dim)
        self.pixel_dim = int(np.prod(self.frame_shape))
        self.encoder = Mlp(self.pixel_dim, self.latent_dim, hidden, seed=seed,
                           stream=STREAM_AE)
        self.decoder = Mlp(self.latent_dim, self.pixel_dim, tuple(reversed(hidden)),
                           seed=seed + 1, stream=STREAM_AE)
        # identity until fitted on the training corpus
        self.latent_mean = np.zeros(self.latent_dim)
        self.latent_std = np.ones(self.latent_dim)

    @classmethod
    def identity(cls, frame_shape):
        """Lossless linear autoencoder with D = pixel count (for tests)."""
        pixel_dim = int(np.prod(frame_shape))
        ae = cls(frame_shape, pixel_dim, hidden=())
        eye = np.eye(pixel_dim, dtype=np.float32)
        ae.encoder.set_param_arrays([eye, np.zeros(pixel_dim, dtype=np.float32)])
        ae.decoder.set_param_arrays([eye, np.zeros(pixel_dim, dtype=np.float32)])
        return ae

    def size(self):
        return self.encoder.size() + self.decoder.size()

    def _check_frames(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        single = frames.shape == self.frame_shape
        if single:
            frames = frames[None]
        if frames.shape[1:] != self.frame_shape:
            raise FrameShapeError(
                f"frame shape {frames.shape[1:]} != expected {self.frame_shape}"
            )
        return frames.reshape(len(frames), self.pixel_dim), single

    def encode_batch(self, frames):
        """(N, C, H, W) -> standardized latents (N, D)."""
        flat, _ = self._check_frames(frames)
        raw = self.encoder.forward_batch(flat)
        return (raw - self.latent_mean) / self.latent_std

    def encode(self, frame):
        """One pixel frame -> one standardized D-vector."""
        return self.encode_batch(np.asarray(frame)[None])[0]

    def decode_batch(self, latents):
        """(N, D) standardized latents -> frames clamped to [0, 1]."""
        latents = np.asarray(latents, dtype=np.float64)
        if latents.ndim == 1:
            latents = latents[None]
        if latents.shape[1] != self.latent_dim:
            raise FrameShapeError(
                f"latent dim {latents.shape[1]} != expected {self.latent_dim}"
            )
        raw = latents * self.latent_std + self.latent_mean
        out = self.decoder.forward_batch(raw)
        return np.clip(out, 0.0, 1.0).reshape(len(latents), *self.frame_shape)

    def decode(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 1:
            raise FrameShapeError(f"latent must be 1-d, got shape {z.shape}")
        return self.decode_batch(z[None])[0]

    def fit_standardization(self, frames, std_floor=1e-6):
        """Freeze the affine layer so corpus latents are zero-mean unit-std."""
        flat, _ = self._check_frames(frames)
        raw = self.encoder.forward_batch(flat)
        self.latent_mean = raw.mean(axis=0)
        self.latent_std = np.maximum(raw.std(axis=0), std_floor)

    def reconstruction_mse(self, frames):
        """Mean per-pixel squared error over a frame set (clamped decode)."""
        flat, _ = self._check_frames(frames)
        recon = self.decode_batch(self.encode_batch(frames)).reshape(flat.shape)
        return float(np.mean((recon - flat) ** 2))


def train_autoencoder(frames, config=AeConfig(), frame_shape=None):
    """Train on a frame set (N, C, H, W); returns the fitted Autoencoder.

    Optimizes unclamped mean squared reconstruction error with AdamW and a
    warmup+cosine schedule.  Aborts if the smoothed loss climbs 10x above
    its running minimum.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4:
        raise ValueError(f"frames must be (N, C, H, W), got {frames.shape}")
    if len(frames) < 1:
        raise ValueError("dataset must be non-empty")
    if frame_shape is None:
        frame_shape = frames.shape[1:]
    ae = Autoencoder(frame_shape, config.latent_dim,
                     hidden=config.hidden_layers(), seed=config.seed)
    flat = frames.reshape(len(frames), -1)

    params = ae.encoder.param_arrays() + ae.decoder.param_arrays()
    n_enc = len(ae.encoder.param_arrays())
    opt = OptimState.for_params(params, weight_decay=config.weight_decay)
    schedule = LrSchedule(max_lr=config.max_lr, warmup_steps=config.warmup_steps,
                          total_steps=max(config.train_steps, config.warmup_steps + 1))

    loss_min = math.inf
    smoothed = None
    for step in range(config.train_steps):
        rng = make_rng(config.seed, STREAM_AE, step + 1)
        idx = rng.integers(0, len(flat), size=min(config.batch_size, len(flat)))
        x = flat[idx]
        z, enc_cache = ae.encoder.forward_cached(x)
        recon, dec_cache = ae.decoder.forward_cached(z)
        resid = recon - x
        loss = float(np.mean(resid * resid))
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite reconstruction loss at step {step}")

        grad_out = 2.0 * resid / resid.size
        dec_grads, grad_z = ae.decoder.vjp(dec_cache, grad_out)
        enc_grads, _ = ae.encoder.vjp(enc_cache, grad_z)

        lr = lr_at(opt.step_count, schedule)
        params = adamw_step(params, enc_grads + dec_grads, opt, lr)
        ae.encoder.set_param_arrays(params[:n_enc])
        ae.decoder.set_param_arrays(params[n_enc:])

        smoothed = loss if smoothed is None else 0.95 * smoothed + 0.05 * loss
        loss_min = min(loss_min, smoothed)
        if step > 100 and smoothed > 10.0 * loss_min:
            raise DivergenceError(
                f"loss {smoothed:.3e} exceeded 10x its minimum {loss_min:.3e} at step {step}"
            )

    ae.fit_standardization(frames)
    return ae
