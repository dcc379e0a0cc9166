"""Evaluation metrics: pixel PSNR/SSIM, a Fréchet-distance proxy, mode stats.

The Fréchet proxy embeds frames through a frozen random projection and
compares Gaussian fits with the usual Fréchet formula.  Its absolute values
are NOT comparable to published feature-network scores; only relative
comparisons between models evaluated with the same extractor are meaningful.
"""

import math
from dataclasses import dataclass

import numpy as np

from .rng import STREAM_EVAL, make_rng

PSNR_CAP_DB = 99.0
FEATURE_SEED = 414243  # fixed: the extractor must be identical across runs


class MetricShapeError(ValueError):
    """Metric operands have incompatible shapes."""


def psnr(a, b, max_val=1.0):
    """10*log10(max_val^2 / MSE), capped at 99 dB for near-zero error."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricShapeError(f"shape {a.shape} != {b.shape}")
    if not max_val > 0.0:
        raise ValueError("max_val must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(max_val * max_val / mse), PSNR_CAP_DB)


def ssim(a, b, window=8, stride=4, c1=0.01 ** 2, c2=0.03 ** 2):
    """Windowed SSIM for single-channel frames in [0, 1]; mean over windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    if b.ndim == 3 and b.shape[0] == 1:
        b = b[0]
    if a.shape != b.shape:
        raise MetricShapeError(f"shape {a.shape} != {b.shape}")
    if a.ndim != 2:
        raise MetricShapeError(f"expected single-channel 2-d frame, got {a.shape}")
    if a.shape[0] < window or a.shape[1] < window:
        raise MetricShapeError(f"frame {a.shape} smaller than {window}x{window} window")
    wa = np.lib.stride_tricks.sliding_window_view(a, (window, window))[::stride, ::stride]
    wb = np.lib.stride_tricks.sliding_window_view(b, (window, window))[::stride, ::stride]
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    var_a = wa.var(axis=(2, 3))
    var_b = wb.var(axis=(2, 3))
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


def _sqrt_psd(mat):
    """Symmetric PSD square root by eigendecomposition, eigenvalues clipped."""
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_gaussian(mu1, cov1, mu2, cov2):
    """Fréchet distance between two Gaussians.

    |mu1-mu2|^2 + tr(cov1 + cov2 - 2*(cov1 cov2)^{1/2}); the cross square
    root is computed as sqrt(C1)^T C2 sqrt(C1) to keep the eigensolve on a
    symmetric matrix.  Identical inputs return exactly 0.
    """
    mu1 = np.asarray(mu1, dtype=np.float64).ravel()
    mu2 = np.asarray(mu2, dtype=np.float64).ravel()
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=np.float64))
    cov2 = np.atleast_2d(np.asarray(cov2, dtype=np.float64))
    if mu1.shape != mu2.shape or cov1.shape != cov2.shape:
        raise MetricShapeError("Gaussian parameter shapes disagree")
    if cov1.shape != (mu1.size, mu1.size):
        raise MetricShapeError(
            f"covariance shape {cov1.shape} incompatible with mean size {mu1.size}"
        )
    if np.array_equal(mu1, mu2) and np.array_equal(cov1, cov2):
        return 0.0
    diff = float(np.sum((mu1 - mu2) ** 2))
    s1 = _sqrt_psd(cov1)
    cross = _sqrt_psd(s1 @ cov2 @ s1)
    value = diff + float(np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(cross))
    return max(value, 0.0)


@dataclass(frozen=True)
class FeatureExtractor:
    """Frozen unit-norm random projection from flattened frames to features."""

    projection: np.ndarray  # (num_features, pixel_dim)

    @classmethod
    def for_shape(cls, frame_shape, num_features=64, seed=FEATURE_SEED):
        pixel_dim = int(np.prod(frame_shape))
        rng = make_rng(seed, STREAM_EVAL)
        proj = rng.standard_normal((num_features, pixel_dim))
        proj /= np.linalg.norm(proj, axis=1, keepdims=True)
        return cls(projection=proj)

    @property
    def num_features(self):
        return self.projection.shape[0]

    def __call__(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        flat = frames.reshape(len(frames), -1)
        if flat.shape[1] != self.projection.shape[1]:
            raise MetricShapeError(
                f"pixel dim {flat.shape[1]} != extractor dim {self.projection.shape[1]}"
            )
        return flat @ self.projection.T


def fd_proxy(real_frames, generated_frames, extractor):
    """Fréchet distance between Gaussian fits of projected frame features."""
    feats_r = extractor(np.asarray(real_frames))
    feats_g = extractor(np.asarray(generated_frames))
    for name, feats in (("real", feats_r), ("generated", feats_g)):
        if len(feats) < extractor.num_features:
            raise ValueError(
                f"{name} side has {len(feats)} frames < {extractor.num_features} features"
            )
    mu_r, cov_r = feats_r.mean(axis=0), np.cov(feats_r, rowvar=False)
    mu_g, cov_g = feats_g.mean(axis=0), np.cov(feats_g, rowvar=False)
    return frechet_gaussian(mu_r, cov_r, mu_g, cov_g)


def mode_coverage(samples, classifier):
    """Empirical (left, right, neither) frequencies under a mode classifier."""
    counts = {"left": 0, "right": 0, "neither": 0}
    n = 0
    for sample in samples:
        label = classifier(sample)
        if label not in counts:
            raise ValueError(f"classifier returned unknown label {label!r}")
        counts[label] += 1
        n += 1
    if n == 0:
        raise ValueError("no samples to classify")
    return counts["left"] / n, counts["right"] / n, counts["neither"] / n


@dataclass(frozen=True)
class MetricsReport:
    """One evaluation row; mode frequencies are None for unimodal tasks."""

    mse: float
    psnr_db: float
    ssim: float
    fd_proxy: float
    mode_frequencies: tuple = None
    n_samples: int = 0

    def csv_row(self):
        modes = ("", "", "")
        if self.mode_frequencies is not None:
            modes = tuple(f"{f:.6f}" for f in self.mode_frequencies)
        return [
            f"{self.mse:.8e}", f"{self.psnr_db:.4f}", f"{self.ssim:.6f}",
            f"{self.fd_proxy:.6e}", *modes, str(self.n_samples),
        ]

    CSV_HEADER = ["mse", "psnr_db", "ssim", "fd_proxy",
                  "mode_left", "mode_right", "mode_neither", "n_samples"]
