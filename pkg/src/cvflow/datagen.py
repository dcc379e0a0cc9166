"""Deterministic synthetic corpora with known dynamics.

Two pixel tasks (a bouncing ball, and a ball whose path forks left/right at
a trigger line) and two latent tasks with closed-form oracles (a stable
linear-Gaussian system and a pure rotation).  Every corpus is a pure function
of its DatasetSpec: generation uses Philox streams keyed by (seed, video),
so the same spec reproduces bit-identical data anywhere.
"""

import math
from dataclasses import dataclass

import numpy as np

from .rng import STREAM_DATA, make_rng

KINDS = ("bouncing_ball", "bimodal_bounce", "latent_linear_gaussian", "latent_rotation")


@dataclass(frozen=True)
class DatasetSpec:
    """Full description of one synthetic corpus."""

    kind: str = "bouncing_ball"
    num_videos: int = 200
    video_length: int = 24
    seed: int = 7
    # pixel kinds
    frame_size: int = 16
    radius: float = 2.0
    speed: float = 1.2
    # bimodal kind
    trigger_y: float = 8.0
    turn_speed: float = 1.2
    fall_speed: float = 1.0
    # latent kinds
    dim: int = 4
    a_scale: float = 0.9
    a_angle: float = 0.3
    b_const: float = 0.1
    sigma: float = 0.1
    theta: float = 0.2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.num_videos < 1 or self.video_length < 1:
            raise ValueError("num_videos and video_length must be >= 1")
        if self.kind in ("bouncing_ball", "bimodal_bounce"):
            if self.frame_size < 16:
                raise ValueError(f"frame_size must be >= 16, got {self.frame_size}")
            if not self.radius < self.frame_size / 4:
                raise ValueError(
                    f"radius {self.radius} too large for frame_size {self.frame_size}"
                )
        if self.kind == "latent_rotation" and self.dim % 2 != 0:
            raise ValueError("latent_rotation requires even dim")


class UnstableDynamicsError(ValueError):
    """The requested linear system has spectral radius >= 1."""


# ---------------------------------------------------------------------------
# pixel tasks


def rasterize_disk(size, cx, cy, radius):
    """Anti-aliased disk: per-pixel coverage ramps linearly over one pixel."""
    coords = np.arange(size, dtype=np.float64)
    dist = np.hypot(coords[None, :] - cx, coords[:, None] - cy)
    return np.clip(radius - dist + 0.5, 0.0, 1.0)


def _reflect(p, v, lo, hi):
    """Fold a position back into [lo, hi] on both axes, flipping velocity."""
    for ax in range(2):
        while p[ax] < lo or p[ax] > hi:
            if p[ax] < lo:
                p[ax] = 2.0 * lo - p[ax]
            else:
                p[ax] = 2.0 * hi - p[ax]
            v[ax] = -v[ax]


def simulate_ball(pos, vel, bounds, steps):
    """Constant-velocity motion with elastic wall reflection.

    bounds = (lo, hi) for both axes; returns positions (steps, 2) and the
    velocity in effect at each step (steps, 2), starting with the initial
    state.
    """
    lo, hi = bounds
    p = np.array(pos, dtype=np.float64)
    v = np.array(vel, dtype=np.float64)
    positions = np.empty((steps, 2))
    velocities = np.empty((steps, 2))
    for j in range(steps):
        positions[j] = p
        velocities[j] = v
        p = p + v
        _reflect(p, v, lo, hi)
    return positions, velocities


def _render_video(positions, size, radius):
    frames = np.empty((len(positions), 1, size, size), dtype=np.float32)
    for j, (cx, cy) in enumerate(positions):
        frames[j, 0] = rasterize_disk(size, cx, cy, radius)
    return frames


def gen_bouncing_ball(spec):
    """Grayscale constant-speed ball corpus, shape (N, L, 1, H, W) in [0, 1]."""
    if spec.kind != "bouncing_ball":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'bouncing_ball'")
    size = spec.frame_size
    lo, hi = spec.radius, size - 1 - spec.radius
    videos = np.empty((spec.num_videos, spec.video_length, 1, size, size), dtype=np.float32)
    for i in range(spec.num_videos):
        rng = make_rng(spec.seed, STREAM_DATA, i)
        pos = rng.uniform(lo + 1.0, hi - 1.0, size=2)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        vel = spec.speed * np.array([math.cos(angle), math.sin(angle)])
        positions, _ = simulate_ball(pos, vel, (lo, hi), spec.video_length)
        videos[i] = _render_video(positions, size, spec.radius)
    return videos


@dataclass(frozen=True)
class BimodalCorpus:
    """Forking-ball corpus plus the ground truth needed to score modes."""

    videos: np.ndarray          # (N, L, 1, H, W)
    labels: np.ndarray          # (N,) 0=left, 1=right
    trigger_frames: np.ndarray  # (N,) first frame index with y >= trigger_y
    positions: np.ndarray       # (N, L, 2) ball centers (x, y)
    spec: DatasetSpec


def gen_bimodal_bounce(spec):
    """Ball falls straight, then turns left or right with probability 1/2.

    The turn fires on the step after the center crosses trigger_y, so the
    mode is unobservable from any frame at or before the trigger frame.
    """
    if spec.kind != "bimodal_bounce":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'bimodal_bounce'")
    size = spec.frame_size
    lo, hi = spec.radius, size - 1 - spec.radius
    videos = np.empty((spec.num_videos, spec.video_length, 1, size, size), dtype=np.float32)
    labels = np.empty(spec.num_videos, dtype=np.int64)
    triggers = np.empty(spec.num_videos, dtype=np.int64)
    all_positions = np.empty((spec.num_videos, spec.video_length, 2))
    for i in range(spec.num_videos):
        rng = make_rng(spec.seed, STREAM_DATA, i)
        x0 = rng.uniform(size / 2.0 - 1.0, size / 2.0 + 1.0)
        y0 = rng.uniform(lo, lo + 1.0)
        turn_right = rng.random() < 0.5
        labels[i] = 1 if turn_right else 0
        sign = 1.0 if turn_right else -1.0

        p = np.array([x0, y0])
        v = np.array([0.0, spec.fall_speed])
        turned = False
        trigger_idx = -1
        positions = np.empty((spec.video_length, 2))
        for j in range(spec.video_length):
            positions[j] = p
            if not turned and p[1] >= spec.trigger_y:
                trigger_idx = j
                v = np.array([sign * spec.turn_speed, spec.fall_speed])
                turned = True
            p = p + v
            _reflect(p, v, lo, hi)
        if trigger_idx < 0:
            raise ValueError("video too short to reach the trigger line")
        triggers[i] = trigger_idx
        all_positions[i] = positions
        videos[i] = _render_video(positions, size, spec.radius)
    return BimodalCorpus(videos, labels, triggers, all_positions, spec)


def frame_centroid(frame):
    """Intensity-weighted center (x, y) of a frame; None when nearly empty."""
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim == 3:
        img = img[0]
    total = img.sum()
    if total < 1e-6:
        return None
    ys, xs = np.mgrid[0:img.shape[0], 0:img.shape[1]]
    return float((xs * img).sum() / total), float((ys * img).sum() / total)


def classify_mode(trigger_frame, later_frame, horizon, spec):
    """Label a predicted frame {left,right,neither} by centroid drift.

    horizon is the number of frames between the two inputs; the threshold is
    half the true post-turn displacement, calibrated from the spec.
    """
    ref = frame_centroid(trigger_frame)
    cur = frame_centroid(later_frame)
    if ref is None or cur is None:
        return "neither"
    dx = cur[0] - ref[0]
    threshold = 0.5 * spec.turn_speed * horizon
    if dx <= -threshold:
        return "left"
    if dx >= threshold:
        return "right"
    return "neither"


# ---------------------------------------------------------------------------
# latent tasks


@dataclass(frozen=True)
class LinearGaussianOracle:
    """Exact conditionals of z' = A z + b + sigma * eta."""

    A: np.ndarray
    b: np.ndarray
    sigma: float

    def next_mean(self, z):
        """Conditional mean A z + b; accepts a vector or a batch."""
        z = np.asarray(z, dtype=np.float64)
        return z @ self.A.T + self.b

    def irreducible_mse(self):
        """Expected squared norm of the one-step prediction error."""
        return self.sigma ** 2 * self.A.shape[0]


@dataclass(frozen=True)
class RotationOracle:
    """Exact dynamics z' = R z for the block-rotation task."""

    R: np.ndarray

    def next(self, z):
        z = np.asarray(z, dtype=np.float64)
        return z @ self.R.T


def _block_rotation(dim, angle):
    R = np.zeros((dim, dim))
    c, s = math.cos(angle), math.sin(angle)
    for i in range(0, dim - 1, 2):
        R[i, i] = c
        R[i, i + 1] = -s
        R[i + 1, i] = s
        R[i + 1, i + 1] = c
    if dim % 2 == 1:
        R[-1, -1] = 1.0
    return R


def linear_gaussian_matrix(spec):
    """Contracting rotation A = a_scale * R(a_angle) with |eig| = a_scale."""
    return spec.a_scale * _block_rotation(spec.dim, spec.a_angle)


def gen_latent_linear_gaussian(spec, A=None, b=None):
    """Latent trajectories of a stable linear-Gaussian system plus oracle."""
    if spec.kind != "latent_linear_gaussian":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'latent_linear_gaussian'")
    if A is None:
        A = linear_gaussian_matrix(spec)
    A = np.asarray(A, dtype=np.float64)
    if b is None:
        b = spec.b_const * np.ones(spec.dim)
    b = np.asarray(b, dtype=np.float64)
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius >= 1.0:
        raise UnstableDynamicsError(f"spectral radius {radius:.4f} >= 1")
    latents = np.empty((spec.num_videos, spec.video_length, spec.dim), dtype=np.float32)
    for i in range(spec.num_videos):
        rng = make_rng(spec.seed, STREAM_DATA, i)
        z = rng.standard_normal(spec.dim)
        for j in range(spec.video_length):
            latents[i, j] = z
            z = A @ z + b + spec.sigma * rng.standard_normal(spec.dim)
    return latents, LinearGaussianOracle(A, b, spec.sigma)


def gen_latent_rotation(spec):
    """Deterministic block-rotation trajectories plus exact oracle."""
    if spec.kind != "latent_rotation":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'latent_rotation'")
    R = _block_rotation(spec.dim, spec.theta)
    latents = np.empty((spec.num_videos, spec.video_length, spec.dim), dtype=np.float32)
    for i in range(spec.num_videos):
        rng = make_rng(spec.seed, STREAM_DATA, i)
        z = rng.standard_normal(spec.dim)
        for j in range(spec.video_length):
            latents[i, j] = z
            z = R @ z
    return latents, RotationOracle(R)


def generate(spec):
    """Dispatch on spec.kind; returns whatever the kind's generator returns."""
    if spec.kind == "bouncing_ball":
        return gen_bouncing_ball(spec)
    if spec.kind == "bimodal_bounce":
        return gen_bimodal_bounce(spec)
    if spec.kind == "latent_linear_gaussian":
        return gen_latent_linear_gaussian(spec)
    return gen_latent_rotation(spec)
