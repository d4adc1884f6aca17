"""Sequence-level data augmentation.

The core mix operation blends one of four fixed facial regions of every
frame of a sequence with the same region of another sequence's onset
(neutral) frame, leaving the rest of the image bit-identical and all
labels untouched. A light photometric/flip pass covers the conventional
augmentations that precede it in the pipeline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, ShapeError
from .sampling import MeSequence

log = logging.getLogger(__name__)

REGION_FOREHEAD = "forehead"
REGION_CHIN = "chin"
REGION_LEFT_CHEEK = "left_cheek"
REGION_RIGHT_CHEEK = "right_cheek"
REGIONS = (REGION_FOREHEAD, REGION_CHIN, REGION_LEFT_CHEEK, REGION_RIGHT_CHEEK)


@dataclass(frozen=True)
class RegionMask:
    region: str
    mask: np.ndarray  # (H, W) bool


@dataclass(frozen=True)
class AugConfig:
    apply_probability: float = 0.5
    omega: float = 0.5
    flip_enabled: bool = True
    jitter_strength: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ContractError(f"AugConfig: apply_probability {self.apply_probability} outside [0,1]")
        if not 0.0 <= self.omega <= 1.0:
            raise ContractError(f"AugConfig: omega {self.omega} outside [0,1]")
        if self.jitter_strength < 0.0:
            raise ContractError(f"AugConfig: negative jitter_strength {self.jitter_strength}")


def region_mask(region: str, height: int, width: int) -> RegionMask:
    """One quarter of the image: forehead strip, chin strip, or a cheek
    quadrant. Requires height and width divisible by 4."""
    if region not in REGIONS:
        raise ContractError(f"region_mask: unknown region {region!r}; choose from {REGIONS}")
    if height % 4 or width % 4:
        raise ContractError(
            f"region_mask: height and width must be divisible by 4, got {height}x{width}"
        )
    mask = np.zeros((height, width), dtype=bool)
    h4, h34 = height // 4, 3 * height // 4
    if region == REGION_FOREHEAD:
        mask[:h4, :] = True
    elif region == REGION_CHIN:
        mask[h34:, :] = True
    elif region == REGION_LEFT_CHEEK:
        mask[h4:h34, : width // 2] = True
    else:
        mask[h4:h34, width // 2 :] = True
    return RegionMask(region=region, mask=mask)


def lsfm_frame(frame: np.ndarray, partner_onset: np.ndarray, mask: RegionMask, omega: float) -> np.ndarray:
    """Blend ``partner_onset`` into ``frame`` inside the masked region.

    Outside the mask the output is bit-identical to ``frame``; inside it
    is ``omega * frame + (1 - omega) * partner_onset``.
    """
    if frame.shape != partner_onset.shape:
        raise ShapeError(f"lsfm_frame: frame {frame.shape} vs partner {partner_onset.shape}")
    if not 0.0 <= omega <= 1.0:
        raise ContractError(f"lsfm_frame: omega {omega} outside [0,1]")
    if frame.shape[:2] != mask.mask.shape:
        raise ShapeError(f"lsfm_frame: frame {frame.shape} vs mask {mask.mask.shape}")
    out = frame.copy()
    out[mask.mask] = omega * frame[mask.mask] + (1.0 - omega) * partner_onset[mask.mask]
    return out


@dataclass(frozen=True)
class MixDecision:
    """What was blended into one sequence, for the run log."""

    index: int
    partner: int
    region: str
    omega: float


def lsfm_batch(
    batch: list[MeSequence],
    config: AugConfig,
    rng: np.random.Generator,
) -> tuple[list[MeSequence], list[MixDecision]]:
    """Apply the region mix across a batch.

    Per sequence, gated at ``apply_probability``: pick a partner other
    than itself, take the partner's onset frame, pick one region, and
    blend that region into every frame. Labels, AU annotations, and key
    frames pass through unchanged. All randomness is drawn up front so
    the per-sequence work is pure.
    """
    if len(batch) < 2:
        if batch and config.apply_probability > 0.0:
            log.info("lsfm_batch: singleton batch, mixing skipped")
        return list(batch), []

    n = len(batch)
    gates = rng.random(n) < config.apply_probability
    partner_offsets = rng.integers(1, n, size=n)  # partner = (i + offset) % n, never i
    region_picks = rng.integers(0, len(REGIONS), size=n)

    out: list[MeSequence] = []
    decisions: list[MixDecision] = []
    for i, seq in enumerate(batch):
        if not gates[i]:
            out.append(seq)
            continue
        j = (i + int(partner_offsets[i])) % n
        partner = batch[j]
        if partner.frames.shape[1:] != seq.frames.shape[1:]:
            raise ShapeError(
                f"lsfm_batch: sequence {seq.frames.shape} vs partner {partner.frames.shape}"
            )
        region = REGIONS[int(region_picks[i])]
        mask = region_mask(region, seq.frames.shape[1], seq.frames.shape[2])
        onset = partner.frames[partner.keyframes.onset]
        frames = seq.frames.copy()
        sel = mask.mask
        frames[:, sel] = config.omega * seq.frames[:, sel] + (1.0 - config.omega) * onset[sel]
        out.append(replace(seq, frames=frames))
        decisions.append(MixDecision(index=i, partner=j, region=region, omega=config.omega))
    return out, decisions


def photometric_flip(seq: MeSequence, config: AugConfig, rng: np.random.Generator) -> MeSequence:
    """Optional horizontal mirror and affine intensity jitter, each drawn
    once per sequence and gated at ``apply_probability``."""
    frames = seq.frames
    changed = False
    if config.flip_enabled and rng.random() < config.apply_probability:
        frames = frames[:, :, ::-1, :].copy()
        changed = True
    if config.jitter_strength > 0.0 and rng.random() < config.apply_probability:
        s = config.jitter_strength
        a = 1.0 + rng.uniform(-s, s)
        b = rng.uniform(-s, s)
        frames = np.clip(a * frames + b, 0.0, 1.0)
        changed = True
    if not changed:
        return seq
    return replace(seq, frames=frames)
