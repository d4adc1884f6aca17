"""Compact trainable video encoder and emotion head.

A clip is cut into non-overlapping spatiotemporal patches, linearly
embedded, and run through a small self-attention stack that yields a
class token and the local token features. A separate single-query
cross-attention stack summarizes the local tokens into a global vector;
a sigmoid-gated scalar fuses the global vector with the class token, and
the fused vector is concatenated back onto the local tokens for the
emotion head. Two affine projectors map the fused visual vector and the
frozen text embedding into the shared alignment space.

All forwards accept a batch axis so one graph covers a mini-batch.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .sampling import MeSequence
from .tensor import (
    Tensor,
    concat,
    layer_norm,
    matmul,
    mul,
    narrow,
    permute,
    read_tensor,
    reshape,
    sigmoid,
    transpose,
    softmax,
    write_tensor,
)

MLP_RATIO = 2


@dataclass(frozen=True)
class EncoderConfig:
    height: int = 64
    width: int = 64
    frames: int = 16
    channels: int = 1
    patch: int = 16
    temporal_stride: int = 2
    d1: int = 64
    local_blocks: int = 2
    global_blocks: int = 2
    heads: int = 4
    d2: int = 64
    head_hidden: int = 64
    head_blocks: int = 2
    num_classes: int = 3
    linear_head: bool = False

    def __post_init__(self):
        if self.height % self.patch or self.width % self.patch:
            raise ContractError(
                f"EncoderConfig: spatial size {self.height}x{self.width} not divisible by patch {self.patch}"
            )
        if self.frames % self.temporal_stride:
            raise ContractError(
                f"EncoderConfig: {self.frames} frames not divisible by temporal stride {self.temporal_stride}"
            )
        if self.d1 % self.heads or self.head_hidden % self.heads:
            raise ContractError(
                f"EncoderConfig: widths {self.d1}/{self.head_hidden} not divisible by {self.heads} heads"
            )
        if self.num_classes < 1:
            raise ContractError(f"EncoderConfig: num_classes must be >= 1, got {self.num_classes}")

    @property
    def tokens(self) -> int:
        return (
            (self.height // self.patch)
            * (self.width // self.patch)
            * (self.frames // self.temporal_stride)
        )

    @property
    def patch_dim(self) -> int:
        return self.temporal_stride * self.patch * self.patch * self.channels


@dataclass
class VideoFeatures:
    """Encoder output bundle; fields keep the autodiff graph alive."""

    f_c: Tensor
    f_local: Tensor
    f_global: Tensor
    alpha: Tensor
    u: Tensor
    z: Tensor


def _init_params(cfg: EncoderConfig, d_text: int, seed: int) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)

    params: dict[str, Tensor] = {}

    def weight(name, fan_in, fan_out):
        params[name] = Tensor(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in), requires_grad=True)

    def bias(name, width):
        params[name] = Tensor(np.zeros((1, width)), requires_grad=True)

    def token(name, count, width):
        params[name] = Tensor(0.02 * rng.standard_normal((count, width)), requires_grad=True)

    def block(prefix, width):
        params[f"{prefix}.ln1.g"] = Tensor(np.ones((1, width)), requires_grad=True)
        bias(f"{prefix}.ln1.b", width)
        for mat in ("wq", "wk", "wv", "wo"):
            weight(f"{prefix}.attn.{mat}", width, width)
        for vec in ("bq", "bk", "bv", "bo"):
            bias(f"{prefix}.attn.{vec}", width)
        params[f"{prefix}.ln2.g"] = Tensor(np.ones((1, width)), requires_grad=True)
        bias(f"{prefix}.ln2.b", width)
        weight(f"{prefix}.mlp.w1", width, MLP_RATIO * width)
        bias(f"{prefix}.mlp.b1", MLP_RATIO * width)
        weight(f"{prefix}.mlp.w2", MLP_RATIO * width, width)
        bias(f"{prefix}.mlp.b2", width)

    weight("patch.w", cfg.patch_dim, cfg.d1)
    bias("patch.b", cfg.d1)
    token("cls", 1, cfg.d1)
    token("pos", 1 + cfg.tokens, cfg.d1)
    for i in range(cfg.local_blocks):
        block(f"local{i}", cfg.d1)
    token("gquery", 1, cfg.d1)
    for i in range(cfg.global_blocks):
        block(f"global{i}", cfg.d1)
        params[f"global{i}.lnc.g"] = Tensor(np.ones((1, cfg.d1)), requires_grad=True)
        bias(f"global{i}.lnc.b", cfg.d1)
    params["alpha_raw"] = Tensor(np.zeros((1, 1)), requires_grad=True)
    weight("projv.w", cfg.d1, cfg.d2)
    bias("projv.b", cfg.d2)
    weight("projt.w", d_text, cfg.d2)
    bias("projt.b", cfg.d2)
    # classifier readouts start at zero so training begins from the
    # uniform prediction instead of a confident input-independent one
    if cfg.linear_head:
        params["linhead.w"] = Tensor(np.zeros((cfg.d1, cfg.num_classes)), requires_grad=True)
        bias("linhead.b", cfg.num_classes)
    else:
        weight("head.in.w", cfg.d1, cfg.head_hidden)
        bias("head.in.b", cfg.head_hidden)
        token("head.pos", 1 + cfg.tokens, cfg.head_hidden)
        for i in range(cfg.head_blocks):
            block(f"head{i}", cfg.head_hidden)
        params["head.out.w"] = Tensor(np.zeros((cfg.head_hidden, cfg.num_classes)), requires_grad=True)
        bias("head.out.b", cfg.num_classes)
    return params


def _affine_norm(x: Tensor, params, prefix: str) -> Tensor:
    return layer_norm(x) * params[f"{prefix}.g"] + params[f"{prefix}.b"]


def _split_heads(x: Tensor, heads: int) -> Tensor:
    k, n, width = x.shape
    return permute(reshape(x, (k, n, heads, width // heads)), (0, 2, 1, 3))


def _attention(q_in: Tensor, kv_in: Tensor, params, prefix: str, heads: int) -> Tensor:
    width = q_in.shape[-1]
    scale = 1.0 / np.sqrt(width // heads)
    q = _split_heads(matmul(q_in, params[f"{prefix}.wq"]) + params[f"{prefix}.bq"], heads)
    k = _split_heads(matmul(kv_in, params[f"{prefix}.wk"]) + params[f"{prefix}.bk"], heads)
    v = _split_heads(matmul(kv_in, params[f"{prefix}.wv"]) + params[f"{prefix}.bv"], heads)
    attn = softmax(matmul(q, transpose(k)) * scale)
    merged = permute(matmul(attn, v), (0, 2, 1, 3))
    merged = reshape(merged, (merged.shape[0], merged.shape[1], width))
    return matmul(merged, params[f"{prefix}.wo"]) + params[f"{prefix}.bo"]


def _mlp(x: Tensor, params, prefix: str) -> Tensor:
    h = matmul(x, params[f"{prefix}.w1"]) + params[f"{prefix}.b1"]
    h = mul(h, sigmoid(h))  # smooth gate keeps finite differences honest
    return matmul(h, params[f"{prefix}.w2"]) + params[f"{prefix}.b2"]


def _self_block(x: Tensor, params, prefix: str, heads: int) -> Tensor:
    h = _affine_norm(x, params, f"{prefix}.ln1")
    x = x + _attention(h, h, params, f"{prefix}.attn", heads)
    x = x + _mlp(_affine_norm(x, params, f"{prefix}.ln2"), params, f"{prefix}.mlp")
    return x


def _cross_block(q: Tensor, ctx: Tensor, params, prefix: str, heads: int) -> Tensor:
    qn = _affine_norm(q, params, f"{prefix}.ln1")
    cn = _affine_norm(ctx, params, f"{prefix}.lnc")
    q = q + _attention(qn, cn, params, f"{prefix}.attn", heads)
    q = q + _mlp(_affine_norm(q, params, f"{prefix}.ln2"), params, f"{prefix}.mlp")
    return q


def extract_patches(frames: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Rearrange (K,T,H,W,C) clips into (K, tokens, patch_dim) rows,
    time-major then spatial row-major."""
    k, t, h, w, c = frames.shape
    if (t, h, w, c) != (cfg.frames, cfg.height, cfg.width, cfg.channels):
        raise ShapeError(
            f"extract_patches: clip {(t, h, w, c)} vs config "
            f"{(cfg.frames, cfg.height, cfg.width, cfg.channels)}"
        )
    st, p = cfg.temporal_stride, cfg.patch
    x = frames.reshape(k, t // st, st, h // p, p, w // p, p, c)
    x = x.transpose(0, 1, 3, 5, 2, 4, 6, 7)
    return np.ascontiguousarray(x.reshape(k, cfg.tokens, cfg.patch_dim))


class VideoTextModel:
    """Owns the trainable parameters for encoder, projectors, and head."""

    def __init__(self, cfg: EncoderConfig, d_text: int = 64, seed: int = 0):
        self.cfg = cfg
        self.d_text = d_text
        self.seed = seed
        self.params = _init_params(cfg, d_text, seed)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # ------------------------------------------------------------------
    # forward passes
    # ------------------------------------------------------------------

    def encode_batch(self, frames: np.ndarray) -> VideoFeatures:
        """Encode (K,T,H,W,C) clips; feature fields carry the batch axis."""
        cfg = self.cfg
        p = self.params
        k = frames.shape[0]
        tokens = matmul(Tensor(extract_patches(frames, cfg)), p["patch.w"]) + p["patch.b"]
        cls = p["cls"] + Tensor(np.zeros((k, 1, 1)))
        x = concat([cls, tokens], axis=1) + p["pos"]
        for i in range(cfg.local_blocks):
            x = _self_block(x, p, f"local{i}", cfg.heads)
        f_c = narrow(x, 1, 0, 1)
        f_local = narrow(x, 1, 1, cfg.tokens)

        q = p["gquery"] + Tensor(np.zeros((k, 1, 1)))
        for i in range(cfg.global_blocks):
            q = _cross_block(q, f_local, p, f"global{i}", cfg.heads)
        f_global = q

        alpha = sigmoid(p["alpha_raw"])
        u = f_global * alpha + f_c * (1.0 - alpha)
        z = concat([u, f_local], axis=1)
        return VideoFeatures(f_c=f_c, f_local=f_local, f_global=f_global, alpha=alpha, u=u, z=z)

    def encode_video(self, seq: MeSequence) -> VideoFeatures:
        """Single-sequence encode; fields are 2-D (no batch axis)."""
        feats = self.encode_batch(seq.frames[None])
        cfg = self.cfg
        return VideoFeatures(
            f_c=reshape(feats.f_c, (1, cfg.d1)),
            f_local=reshape(feats.f_local, (cfg.tokens, cfg.d1)),
            f_global=reshape(feats.f_global, (1, cfg.d1)),
            alpha=feats.alpha,
            u=reshape(feats.u, (1, cfg.d1)),
            z=reshape(feats.z, (1 + cfg.tokens, cfg.d1)),
        )

    def project_vis(self, u: Tensor) -> Tensor:
        """Affine map of fused visual vectors into the shared space."""
        if u.ndim == 3:
            u = reshape(u, (u.shape[0], u.shape[2]))
        if u.ndim != 2 or u.shape[1] != self.cfg.d1:
            raise ShapeError(f"project_vis: expected rows of width {self.cfg.d1}, got {u.shape}")
        return matmul(u, self.params["projv.w"]) + self.params["projv.b"]

    def project_text(self, embedding) -> Tensor:
        """Affine map of frozen text embeddings into the shared space."""
        e = embedding if isinstance(embedding, Tensor) else Tensor(np.atleast_2d(embedding))
        if e.ndim != 2 or e.shape[1] != self.d_text:
            raise ShapeError(f"project_text: expected rows of width {self.d_text}, got {e.shape}")
        return matmul(e, self.params["projt.w"]) + self.params["projt.b"]

    def emotion_scores(self, z: Tensor) -> Tensor:
        """Emotion logits (K, C) from fused token bundles (K, 1+L, D1)."""
        cfg = self.cfg
        p = self.params
        if z.ndim == 2:
            z = reshape(z, (1,) + z.shape)
        if z.shape[1] != 1 + cfg.tokens or z.shape[2] != cfg.d1:
            raise ShapeError(
                f"emotion_scores: expected (K, {1 + cfg.tokens}, {cfg.d1}), got {z.shape}"
            )
        k = z.shape[0]
        if cfg.linear_head:
            fused = reshape(narrow(z, 1, 0, 1), (k, cfg.d1))
            return matmul(fused, p["linhead.w"]) + p["linhead.b"]
        x = matmul(z, p["head.in.w"]) + p["head.in.b"]
        x = x + p["head.pos"]
        for i in range(cfg.head_blocks):
            x = _self_block(x, p, f"head{i}", cfg.heads)
        first = reshape(narrow(x, 1, 0, 1), (k, cfg.head_hidden))
        return matmul(first, p["head.out.w"]) + p["head.out.b"]

    def emotion_head(self, z: Tensor) -> Tensor:
        """Single-sample logits as a length-C vector."""
        return reshape(self.emotion_scores(z), (self.cfg.num_classes,))

    # ------------------------------------------------------------------
    # checkpointing
    # ------------------------------------------------------------------

    def save(self, directory: str) -> None:
        os.makedirs(os.path.join(directory, "params"), exist_ok=True)
        manifest = {
            "config": asdict(self.cfg),
            "d_text": self.d_text,
            "seed": self.seed,
            "params": {name: list(t.shape) for name, t in self.params.items()},
        }
        with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name, t in self.params.items():
            write_tensor(os.path.join(directory, "params", f"{name}.bin"), t.data)

    @classmethod
    def load(cls, directory: str) -> "VideoTextModel":
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        model = cls(EncoderConfig(**manifest["config"]), d_text=manifest["d_text"], seed=manifest["seed"])
        for name, shape in manifest["params"].items():
            data = read_tensor(os.path.join(directory, "params", f"{name}.bin"))
            if list(data.shape) != shape or name not in model.params:
                raise ContractError(f"checkpoint mismatch for parameter {name}")
            model.params[name].data = data
        return model
