"""Training loop with the progressive dual-loss schedule, plus LOSO runs.

Each epoch shuffles, augments (photometric then region mix, both gated),
encodes the batch, builds one AU prompt per sample with a freshly drawn
template, and combines the alignment and classification losses at the
epoch's weights. The alignment weight is read off the progressive line
so the first epoch trains at the full weight and the last at the
minimum; the learning rate follows the warmup/cosine schedule by epoch
number. All randomness is keyed off the run seed, so a rerun with the
same configuration is bit-identical.
"""

from __future__ import annotations

import logging

import numpy as np

from .aucodes import FrozenTextEmbedder, TemplateBank, describe, render, tokenize
from .augment import lsfm_batch, photometric_flip
from .config import RunConfig
from .encoder import VideoTextModel
from .errors import ContractError, NumericDomainError
from .evaluation import (
    EvalReport,
    aggregate_reports,
    compute_metrics,
    confusion,
    loso_folds,
)
from .losses import clip_loss, focal_loss, lambda_progress
from .optim import AdamWState, LrSchedule, adamw_step, lr_at
from .sampling import MeSequence
from .tensor import Tensor

log = logging.getLogger(__name__)


def one_hot(labels, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    for i, c in enumerate(labels):
        if not 0 <= c < num_classes:
            raise ContractError(f"one_hot: label {c} outside [0, {num_classes})")
        out[i, c] = 1.0
    return out


def lambda_for_epoch(epoch: int, total_epochs: int, cfg: RunConfig) -> float:
    """Alignment weight used while training epoch ``epoch`` (0-based).

    The progressive line is sampled so its endpoints land on the first
    and last epoch of the run; ablations pin it to 0 or to the minimum.
    """
    loss_cfg = cfg.effective_loss()
    if cfg.no_alignment:
        return 0.0
    if cfg.constant_lambda:
        return loss_cfg.lambda_0
    progress = epoch / (total_epochs - 1) if total_epochs > 1 else 0.0
    return lambda_progress(progress, loss_cfg)


def prompt_for(
    seq: MeSequence,
    cfg: RunConfig,
    names: tuple[str, ...],
    bank: TemplateBank,
    rng: np.random.Generator,
) -> tuple[str, tuple[int, ...]]:
    """Prompt text and token ids for one sample under the configured mode."""
    if cfg.emo_prompts:
        text = f"This micro-expression expresses {names[seq.emotion]}."
        return text, tokenize(text)
    if seq.au_set is None:
        raise ContractError(f"prompt_for: sample of subject {seq.subject_id!r} has no AU annotation")
    description = describe(seq.au_set, style=cfg.prompt_style, order=cfg.au_order, rng=rng)
    prompt = render(bank, description, rng=rng)
    return prompt.text, prompt.token_ids


def train_model(
    sequences: list[MeSequence],
    cfg: RunConfig,
    names: tuple[str, ...],
    run_key: int = 0,
) -> tuple[VideoTextModel, list[dict]]:
    """Train one model on the given sequences; returns per-epoch log rows."""
    if not sequences:
        raise ContractError("train_model: empty training set (degenerate fold?)")
    num_classes = cfg.encoder.num_classes
    if len(names) != num_classes:
        raise ContractError(
            f"train_model: model expects {num_classes} classes, dataset has {len(names)}"
        )
    loss_cfg = cfg.effective_loss()
    model = VideoTextModel(cfg.encoder, d_text=cfg.d_text, seed=int(
        np.random.default_rng([cfg.seed, 31, run_key]).integers(0, 2**31)
    ))
    if cfg.epochs == 0:
        return model, []

    schedule = LrSchedule(cfg.base_lr, cfg.warmup_epochs, max(cfg.epochs, cfg.warmup_epochs + 1))
    state = AdamWState(lr=cfg.base_lr, weight_decay=cfg.weight_decay)
    embedder = FrozenTextEmbedder(dim=cfg.d_text, seed=cfg.embedder_seed)
    bank = TemplateBank.first(cfg.template_count)
    shuffle_rng = np.random.default_rng([cfg.seed, 41, run_key])
    aug_rng = np.random.default_rng([cfg.seed, 43, run_key])
    prompt_rng = np.random.default_rng([cfg.seed, 47, run_key])

    logs: list[dict] = []
    for epoch in range(cfg.epochs):
        lam = lambda_for_epoch(epoch, cfg.epochs, cfg)
        lr = lr_at(epoch + 1, schedule)
        state.lr = lr
        order = shuffle_rng.permutation(len(sequences))
        clip_vals, cls_vals, total_vals = [], [], []
        for start in range(0, len(order), cfg.batch_size):
            batch = [sequences[i] for i in order[start : start + cfg.batch_size]]
            if cfg.photometric_enabled:
                batch = [photometric_flip(s, cfg.aug, aug_rng) for s in batch]
            if cfg.lsfm_enabled:
                batch, decisions = lsfm_batch(batch, cfg.aug, aug_rng)
                for d in decisions:
                    log.debug("mix epoch=%d idx=%d partner=%d region=%s", epoch, d.index, d.partner, d.region)

            frames = np.stack([s.frames for s in batch])
            feats = model.encode_batch(frames)
            scores = model.emotion_scores(feats.z)
            labels = one_hot([s.emotion for s in batch], num_classes)
            cls = focal_loss(scores, labels, loss_cfg.gamma)
            if lam > 0.0:
                embeddings = np.stack(
                    [embedder.embed(prompt_for(s, cfg, names, bank, prompt_rng)[1]) for s in batch]
                )
                x_vis = model.project_vis(feats.u)
                x_text = model.project_text(Tensor(embeddings))
                clip = clip_loss(x_vis, x_text, loss_cfg.tau)
            else:
                clip = Tensor(0.0)
            total = clip * lam + cls * (loss_cfg.lambda_s - lam)
            if not np.isfinite(total.data).all():
                raise NumericDomainError(
                    f"train_model: non-finite loss at epoch {epoch}, batch {start // cfg.batch_size} "
                    f"(clip={clip.data}, cls={cls.data})"
                )
            model.zero_grad()
            total.backward()
            grads = {
                name: p.grad if p.grad is not None else np.zeros_like(p.data)
                for name, p in model.params.items()
            }
            adamw_step(model.params, grads, state)
            clip_vals.append(clip.item())
            cls_vals.append(cls.item())
            total_vals.append(total.item())
        logs.append(
            {
                "epoch": epoch,
                "lambda": lam,
                "lr": lr,
                "clip_loss": float(np.mean(clip_vals)),
                "cls_loss": float(np.mean(cls_vals)),
                "total": float(np.mean(total_vals)),
            }
        )
    return model, logs


def predict(model: VideoTextModel, sequences: list[MeSequence], batch_size: int = 16) -> np.ndarray:
    """Argmax emotion prediction per sequence."""
    preds = []
    for start in range(0, len(sequences), batch_size):
        frames = np.stack([s.frames for s in sequences[start : start + batch_size]])
        feats = model.encode_batch(frames)
        scores = model.emotion_scores(feats.z)
        preds.extend(np.argmax(scores.data, axis=1).tolist())
    return np.asarray(preds, dtype=np.int64)


def evaluate(model: VideoTextModel, sequences: list[MeSequence], batch_size: int = 16, fold_id=None) -> EvalReport:
    preds = predict(model, sequences, batch_size)
    labels = [s.emotion for s in sequences]
    return compute_metrics(confusion(preds, labels, model.cfg.num_classes), fold_id=fold_id)


def run_loso(
    sequences: list[MeSequence],
    cfg: RunConfig,
    names: tuple[str, ...],
) -> tuple[EvalReport, list[EvalReport], list[list[dict]]]:
    """Train per LOSO fold and aggregate (pooled by default)."""
    folds = loso_folds([s.subject_id for s in sequences])
    if len(folds.folds) < 2:
        raise ContractError("run_loso: need at least two subjects for LOSO")
    reports: list[EvalReport] = []
    fold_logs: list[list[dict]] = []
    for fold_idx, (subject, train_idx, test_idx) in enumerate(folds.folds):
        train_seqs = [sequences[i] for i in train_idx]
        test_seqs = [sequences[i] for i in test_idx]
        if not train_seqs:
            raise ContractError(f"run_loso: fold {subject!r} has an empty training set")
        model, logs = train_model(train_seqs, cfg, names, run_key=1000 + fold_idx)
        reports.append(evaluate(model, test_seqs, cfg.batch_size, fold_id=subject))
        fold_logs.append(logs)
    combined = aggregate_reports(reports, cfg.loso_agg)
    return combined, reports, fold_logs
