"""AdamW with decoupled weight decay and a warmup + cosine-decay LR schedule."""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup 0 -> max_lr, cosine decay max_lr -> min_lr, then flat."""

    max_lr: float = 1e-3
    warmup_steps: int = 500
    total_steps: int = 20_000
    min_lr: float = 0.0

    def __post_init__(self):
        if not (0 < self.warmup_steps < self.total_steps):
            raise ValueError(
                f"need 0 < warmup_steps < total_steps, got {self.warmup_steps}, {self.total_steps}"
            )
        if not (self.max_lr > self.min_lr >= 0.0):
            raise ValueError(f"need max_lr > min_lr >= 0, got {self.max_lr}, {self.min_lr}")


def lr_at(step, schedule):
    """Learning rate at an integer step; clamped to min_lr past total_steps."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step < schedule.warmup_steps:
        return schedule.max_lr * step / schedule.warmup_steps
    if step >= schedule.total_steps:
        return schedule.min_lr
    frac = (step - schedule.warmup_steps) / (schedule.total_steps - schedule.warmup_steps)
    amp = 0.5 * (1.0 + math.cos(math.pi * frac))
    return schedule.min_lr + (schedule.max_lr - schedule.min_lr) * amp


@dataclass
class OptimState:
    """Adam moment accumulators, shape-congruent with the parameter list."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps_num: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if self.step_count < 0:
            raise ValueError("step_count must be >= 0")

    @classmethod
    def for_params(cls, params, **kwargs):
        state = cls(**kwargs)
        state.m = [np.zeros(p.shape, dtype=np.float64) for p in params]
        state.v = [np.zeros(p.shape, dtype=np.float64) for p in params]
        return state


def clip_grad_norm(grads, max_norm):
    """Scale gradients in place so their global L2 norm is <= max_norm."""
    total = math.sqrt(sum(float(np.sum(np.square(g))) for g in grads))
    if total > max_norm > 0.0:
        scale = max_norm / total
        grads = [g * scale for g in grads]
    return grads


def adamw_step(params, grads, state, lr):
    """One decoupled-weight-decay Adam update.

    Mutates state, returns the updated parameter list (same dtypes as the
    inputs; arithmetic in float64).  Raises on non-finite updates.
    """
    if lr < 0.0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and moments must have equal length")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient {i} shape {np.shape(g)} != param shape {p.shape}")
        g64 = np.asarray(g, dtype=np.float64)
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g64
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g64 * g64
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p64 = np.asarray(p, dtype=np.float64)
        p64 = p64 - lr * state.weight_decay * p64
        p64 = p64 - lr * m_hat / (np.sqrt(v_hat) + state.eps_num)
        if not np.all(np.isfinite(p64)):
            raise FloatingPointError(f"non-finite parameter after update of tensor {i}")
        out.append(p64.astype(p.dtype))
    return out
