"""Alignment and classification objectives plus the progressive weighting.

The alignment term is the symmetric temperature-scaled contrastive loss
over cosine similarities; classification uses the focal loss on softmax
probabilities. Their weights are tied: the alignment weight decays
linearly from ``lambda_s`` to ``lambda_0`` over training while the
classification weight grows so the two always sum to ``lambda_s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericDomainError, ShapeError
from .tensor import (
    Tensor,
    div,
    log_softmax,
    matmul,
    mul,
    power,
    softmax,
    tsum,
    transpose,
)


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.07
    gamma: float = 2.0
    lambda_s: float = 2.0
    lambda_0: float = 1.0
    total_epochs: int = 55

    def __post_init__(self):
        if self.tau <= 0:
            raise ContractError(f"LossConfig: tau must be positive, got {self.tau}")
        if self.gamma < 0:
            raise ContractError(f"LossConfig: gamma must be nonnegative, got {self.gamma}")
        if not 0 <= self.lambda_0 <= self.lambda_s:
            raise ContractError(
                f"LossConfig: need 0 <= lambda_0 ({self.lambda_0}) <= lambda_s ({self.lambda_s})"
            )
        if self.total_epochs < 1:
            raise ContractError(f"LossConfig: total_epochs must be >= 1, got {self.total_epochs}")


def cosine_sim(x, y) -> float:
    """Cosine similarity of two vectors, in [-1, 1]."""
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.shape != yv.shape:
        raise ShapeError(f"cosine_sim: shapes {xv.shape} and {yv.shape}")
    nx = np.linalg.norm(xv)
    ny = np.linalg.norm(yv)
    if nx == 0.0 or ny == 0.0:
        raise NumericDomainError("cosine_sim: zero vector")
    return float(np.clip(xv @ yv / (nx * ny), -1.0, 1.0))


def _normalize_rows(x: Tensor, op: str) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"{op}: expected a 2-D embedding matrix, got {x.shape}")
    sq = tsum(mul(x, x), axis=1, keepdims=True)
    if np.any(sq.data == 0.0):
        raise NumericDomainError(f"{op}: zero embedding row")
    return div(x, power(sq, 0.5))


def similarity_matrix(x_vis: Tensor, x_text: Tensor) -> Tensor:
    """Pairwise cosine similarities between two row-aligned embedding sets."""
    if x_vis.shape != x_text.shape:
        raise ShapeError(f"similarity_matrix: shapes {x_vis.shape} and {x_text.shape}")
    return matmul(_normalize_rows(x_vis, "similarity_matrix"), transpose(_normalize_rows(x_text, "similarity_matrix")))


def clip_loss(x_vis: Tensor, x_text: Tensor, tau: float = 0.07) -> Tensor:
    """Symmetric contrastive loss over the K matched embedding pairs.

    Both softmax directions (per visual row and per text column) are
    evaluated in log space for stability; the result is the mean negative
    log-likelihood of the diagonal, averaged over the two directions.
    """
    if tau <= 0:
        raise ContractError(f"clip_loss: tau must be positive, got {tau}")
    sims = similarity_matrix(x_vis, x_text)
    k = sims.shape[0]
    logits = sims * (1.0 / tau)
    eye = Tensor(np.eye(k))
    row_diag = tsum(mul(log_softmax(logits), eye))
    col_diag = tsum(mul(log_softmax(transpose(logits)), eye))
    return (row_diag + col_diag) * (-1.0 / (2.0 * k))


def focal_loss(scores: Tensor, labels: np.ndarray, gamma: float = 2.0) -> Tensor:
    """Mean focal loss over a batch of score rows and one-hot labels."""
    if gamma < 0:
        raise ContractError(f"focal_loss: gamma must be nonnegative, got {gamma}")
    onehot = np.asarray(labels, dtype=np.float64)
    if scores.ndim != 2 or onehot.shape != scores.shape:
        raise ShapeError(f"focal_loss: scores {scores.shape} vs labels {onehot.shape}")
    if not (
        np.all((onehot == 0.0) | (onehot == 1.0))
        and np.all(onehot.sum(axis=1) == 1.0)
    ):
        raise ContractError("focal_loss: labels must be one-hot rows")
    k = scores.shape[0]
    logp = log_softmax(scores)
    picked = mul(logp, Tensor(onehot))
    if gamma == 0.0:
        return tsum(picked) * (-1.0 / k)
    p = softmax(scores)
    modulator = power(1.0 - p, gamma)
    return tsum(mul(modulator, picked)) * (-1.0 / k)


def lambda_progress(progress: float, cfg: LossConfig) -> float:
    """Alignment weight at a schedule position in [0, 1]."""
    if not 0.0 <= progress <= 1.0:
        raise ContractError(f"lambda_progress: position {progress} outside [0,1]")
    return cfg.lambda_s - (cfg.lambda_s - cfg.lambda_0) * progress


def lambda_at(epoch: int, cfg: LossConfig) -> float:
    """Alignment weight at an integer epoch in [0, total_epochs]."""
    if not 0 <= epoch <= cfg.total_epochs:
        raise ContractError(f"lambda_at: epoch {epoch} outside [0, {cfg.total_epochs}]")
    return lambda_progress(epoch / cfg.total_epochs, cfg)


def total_loss(clip, cls, epoch: int, cfg: LossConfig):
    """Progressive combination: alignment weighted by lambda(epoch), the
    classification term by what remains of the fixed weight sum."""
    weight = lambda_at(epoch, cfg)
    return clip * weight + cls * (cfg.lambda_s - weight)
