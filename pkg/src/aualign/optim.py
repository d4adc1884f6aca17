"""AdamW with decoupled weight decay, plus the warmup/cosine LR schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .tensor import Tensor


@dataclass
class AdamWState:
    """Per-parameter moment buffers and the shared hyperparameters."""

    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.05
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamWState) -> None:
    """One bias-corrected AdamW update, in place.

    Weight decay is decoupled: it scales the parameter directly rather
    than entering the moment estimates.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise ContractError(f"adamw_step: missing gradient for {name}")
        if g.shape != p.data.shape:
            raise ShapeError(f"adamw_step: {name} parameter {p.data.shape} vs gradient {g.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        if state.weight_decay:
            p.data *= 1.0 - state.lr * state.weight_decay
        denom = np.sqrt(v / bc2)
        denom += state.eps
        denom *= bc1
        p.data -= state.lr * m / denom


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to ``base_lr`` then cosine decay to zero, by epoch."""

    base_lr: float = 5e-5
    warmup_epochs: int = 5
    total_epochs: int = 55

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ContractError(f"LrSchedule: base_lr must be positive, got {self.base_lr}")
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ContractError(
                f"LrSchedule: need 0 <= warmup ({self.warmup_epochs}) < total ({self.total_epochs})"
            )


def lr_at(epoch: int, schedule: LrSchedule) -> float:
    """LR at an integer epoch in [0, total]: the ramp reaches base_lr
    exactly at warmup_epochs and the cosine tail reaches 0 at total_epochs."""
    if epoch < 0 or epoch > schedule.total_epochs:
        raise ContractError(
            f"lr_at: epoch {epoch} outside [0, {schedule.total_epochs}]"
        )
    if epoch <= schedule.warmup_epochs:
        if schedule.warmup_epochs == 0:
            return schedule.base_lr
        return schedule.base_lr * epoch / schedule.warmup_epochs
    span = schedule.total_epochs - schedule.warmup_epochs
    progress = (epoch - schedule.warmup_epochs) / span
    return schedule.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
