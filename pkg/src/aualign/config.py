"""Aggregate run configuration with a stable content digest.

The digest (first 12 hex chars of SHA-256 over the canonical JSON form)
names every artifact a run produces, so identical configurations map to
identical file names and any change is visible at a glance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .aucodes import ORDER_FIXED, ORDER_SHUFFLED, STYLE_ACTION, STYLE_FACS, ALL_TEMPLATES
from .augment import AugConfig
from .encoder import EncoderConfig
from .errors import ContractError
from .evaluation import AGG_AVERAGED, AGG_POOLED
from .losses import LossConfig
from .synthdata import SynthConfig


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    frames: int = 16
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    d_text: int = 64
    embedder_seed: int = 7
    loss: LossConfig = field(default_factory=LossConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    base_lr: float = 5e-5
    warmup_epochs: int = 5
    weight_decay: float = 0.05
    batch_size: int = 16
    epochs: int = 55
    seed: int = 0
    prompt_style: str = STYLE_ACTION
    au_order: str = ORDER_FIXED
    template_count: int = 7
    emo_prompts: bool = False
    lsfm_enabled: bool = True
    photometric_enabled: bool = True
    no_alignment: bool = False
    constant_lambda: bool = False
    loso_agg: str = AGG_POOLED

    def __post_init__(self):
        if self.prompt_style not in (STYLE_ACTION, STYLE_FACS):
            raise ContractError(f"RunConfig: unknown prompt_style {self.prompt_style!r}")
        if self.au_order not in (ORDER_FIXED, ORDER_SHUFFLED):
            raise ContractError(f"RunConfig: unknown au_order {self.au_order!r}")
        if not 1 <= self.template_count <= len(ALL_TEMPLATES):
            raise ContractError(
                f"RunConfig: template_count {self.template_count} outside 1..{len(ALL_TEMPLATES)}"
            )
        if self.batch_size < 1:
            raise ContractError(f"RunConfig: batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ContractError(f"RunConfig: epochs must be >= 0, got {self.epochs}")
        if self.frames < 3:
            raise ContractError(f"RunConfig: frames must be >= 3, got {self.frames}")
        if self.loso_agg not in (AGG_POOLED, AGG_AVERAGED):
            raise ContractError(f"RunConfig: unknown loso_agg {self.loso_agg!r}")

    def digest(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    def effective_loss(self) -> LossConfig:
        """Loss schedule tied to the configured epoch count."""
        return replace(self.loss, total_epochs=max(1, self.epochs))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        kwargs = dict(raw)
        for name, sub_cls in (
            ("synth", SynthConfig),
            ("encoder", EncoderConfig),
            ("loss", LossConfig),
            ("aug", AugConfig),
        ):
            if name in kwargs and isinstance(kwargs[name], dict):
                kwargs[name] = sub_cls(**kwargs[name])
        unknown = set(kwargs) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractError(f"RunConfig: unknown config keys {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ContractError(f"RunConfig: invalid JSON ({exc})") from None
        return cls.from_dict(raw)
