"""Closed-form math of the continuous latent flow between consecutive frames.

The process runs on latent vectors: at time t=0 it sits exactly on the
current frame's latent, at t=1 exactly on the next frame's latent, and in
between it is a noisy convex combination whose noise magnitude follows
g(t) = -t*log(t).  Because g vanishes at both endpoints the process pins to
real data on both sides, which is what lets sampling start from the context
latent instead of a Gaussian prior.

All functions here are pure; arrays are upcast to float64 internally.
"""

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class DimensionMismatchError(ValueError):
    """Operands carry latent vectors of different dimension."""


@dataclass(frozen=True)
class ProcessTime:
    """Continuous interpolation parameter t in [0, 1]."""

    t: float

    def __post_init__(self):
        t = float(self.t)
        if not (0.0 <= t <= 1.0) or not math.isfinite(t):
            raise ValueError(f"process time must lie in [0, 1], got {self.t}")
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class ScheduleConstants:
    """Regularizers for the g(t) -> 0 boundary.

    t_floor bounds training times away from {0, 1}; weight_cap bounds the
    1/(2 g^2) loss weight, which diverges at the endpoints.
    """

    t_floor: float = 1e-3
    weight_cap: float = 100.0

    def __post_init__(self):
        if not (0.0 < self.t_floor < 0.5):
            raise ValueError(f"t_floor must lie in (0, 0.5), got {self.t_floor}")
        if not self.weight_cap > 0.0:
            raise ValueError(f"weight_cap must be positive, got {self.weight_cap}")


def as_latent_frame(x, name="latent"):
    """Validate a single latent: 1-d, finite, positive dimension."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_latent_block(x, name="block"):
    """Validate a block of consecutive latents: shape (k+1, D), finite."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have shape (k+1, D), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _as_latent(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise ValueError(f"{name} must be at least 1-d")
    return arr


def _check_same_shape(*named):
    shapes = {a.shape for _, a in named}
    if len(shapes) > 1:
        detail = ", ".join(f"{n}={a.shape}" for n, a in named)
        raise DimensionMismatchError(f"latent shapes disagree: {detail}")


def _time_value(t):
    return t.t if isinstance(t, ProcessTime) else ProcessTime(float(t)).t


def noise_schedule(t):
    """g(t) = -t*log(t), extended by its limit g(0) = 0; g(1) = 0 exactly."""
    tv = _time_value(t)
    if tv == 0.0 or tv == 1.0:
        return 0.0
    return -tv * math.log(tv)


def noise_schedule_array(t):
    """Vectorized g(t) for a float array with entries in [0, 1]."""
    tv = np.asarray(t, dtype=np.float64)
    if np.any(tv < 0.0) or np.any(tv > 1.0):
        raise ValueError("process times must lie in [0, 1]")
    out = np.zeros_like(tv)
    interior = (tv > 0.0) & (tv < 1.0)
    out[interior] = -tv[interior] * np.log(tv[interior])
    return out


def interpolate(z_j, z_j1, t, eps):
    """Noisy interpolant (1-t)*z_j + t*z_j1 + (g(t)/sqrt(2))*eps.

    eps is a caller-supplied standard-normal draw so the function stays pure.
    At t=0 the result is z_j exactly, at t=1 it is z_j1 exactly.
    """
    z_j = _as_latent(z_j, "z_j")
    z_j1 = _as_latent(z_j1, "z_j1")
    eps = _as_latent(eps, "eps")
    _check_same_shape(("z_j", z_j), ("z_j1", z_j1), ("eps", eps))
    tv = _time_value(t)
    g = noise_schedule(tv)
    return (1.0 - tv) * z_j + tv * z_j1 + (g / SQRT2) * eps


def forward_step(z_t, z_j, z_j1, dt, t, eps):
    """One incremental step z_t + (z_j1 - z_j)*dt + g(t)*eps.

    The caller draws eps with per-entry variance dt, matching the
    step-size-scaled noise of the discretized forward process.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    z_t = _as_latent(z_t, "z_t")
    z_j = _as_latent(z_j, "z_j")
    z_j1 = _as_latent(z_j1, "z_j1")
    eps = _as_latent(eps, "eps")
    _check_same_shape(("z_t", z_t), ("z_j", z_j), ("z_j1", z_j1), ("eps", eps))
    g = noise_schedule(t)
    return z_t + (z_j1 - z_j) * float(dt) + g * eps


def posterior_params(z_t, z_j, z_j1, t, dt):
    """Gaussian posterior of the next process state given endpoints.

    mean = z_t + (z_j1 - z_j)*dt, std = g(t)*sqrt(dt).  The dt scaling keeps
    the posterior consistent with forward_step's noise variance.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    z_t = _as_latent(z_t, "z_t")
    z_j = _as_latent(z_j, "z_j")
    z_j1 = _as_latent(z_j1, "z_j1")
    _check_same_shape(("z_t", z_t), ("z_j", z_j), ("z_j1", z_j1))
    mean = z_t + (z_j1 - z_j) * float(dt)
    std = noise_schedule(t) * math.sqrt(float(dt))
    return mean, std


def loss_weight(t, constants=ScheduleConstants()):
    """Training weight min(1/(2 g(t)^2), weight_cap); always finite, positive."""
    g = noise_schedule(t)
    if g == 0.0:
        return float(constants.weight_cap)
    return min(1.0 / (2.0 * g * g), float(constants.weight_cap))
