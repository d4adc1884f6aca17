"""Temporally adaptive downsampling of raw clips to a fixed frame count.

The onset, apex, and offset frames are always kept; the remaining slots
are split between the rise and fall phases in proportion to their
lengths and sampled at uniform real-valued spacing. Clips shorter than
the target length repeat frames (selection stays nondecreasing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aucodes import AuAnnotation
from .errors import ContractError

DEFAULT_FRAMES = 16


@dataclass(frozen=True)
class KeyFrames:
    onset: int
    apex: int
    offset: int

    def validate(self, raw_len: int) -> None:
        if not 0 <= self.onset <= self.apex <= self.offset < raw_len:
            raise ContractError(
                f"KeyFrames: need 0 <= onset <= apex <= offset < {raw_len}, "
                f"got ({self.onset}, {self.apex}, {self.offset})"
            )


@dataclass(frozen=True)
class MeSequence:
    """One fixed-length sample: frames in [0,1] plus its annotations."""

    frames: np.ndarray  # (T, H, W, C) float64
    subject_id: str
    emotion: int
    au_set: AuAnnotation | None
    keyframes: KeyFrames
    raw_indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.frames.ndim != 4:
            raise ContractError(f"MeSequence: frames must be (T,H,W,C), got {self.frames.shape}")
        self.keyframes.validate(self.frames.shape[0])


def _segment_positions(lo: int, hi: int, count: int) -> list[int]:
    """``count`` indices at uniform real spacing strictly inside (lo, hi),
    rounded to the nearest integer; duplicates shift to the nearest free
    integer in the open segment, and repetition stands once it is full."""
    if count <= 0:
        return []
    raw = [lo + (hi - lo) * (m / (count + 1)) for m in range(1, count + 1)]
    available = set(range(lo + 1, hi))
    chosen: list[int] = []
    for pos in raw:
        idx = int(round(pos))
        idx = min(max(idx, lo + 1), max(hi - 1, lo + 1)) if hi - lo >= 2 else idx
        if idx in available:
            available.remove(idx)
            chosen.append(idx)
            continue
        if available:
            nearest = min(available, key=lambda cand: (abs(cand - idx), cand))
            available.remove(nearest)
            chosen.append(nearest)
        else:
            chosen.append(min(max(int(round(pos)), lo), hi))
    return chosen


def select_indices(raw_len: int, kf: KeyFrames, target: int) -> list[int]:
    """The frame indices kept by the downsampler, sorted nondecreasing."""
    if raw_len < 1:
        raise ContractError(f"select_indices: empty clip (length {raw_len})")
    if target < 3:
        raise ContractError(f"select_indices: target must be >= 3, got {target}")
    kf.validate(raw_len)
    if raw_len == target:
        return list(range(raw_len))

    interior = target - 3
    rise = kf.apex - kf.onset
    span = max(1, kf.offset - kf.onset)
    k_rise = int(round(interior * rise / span))
    k_fall = interior - k_rise
    picks = (
        [kf.onset, kf.apex, kf.offset]
        + _segment_positions(kf.onset, kf.apex, k_rise)
        + _segment_positions(kf.apex, kf.offset, k_fall)
    )
    picks.sort()
    return picks


def keyframe_downsample(
    raw_frames: np.ndarray,
    kf: KeyFrames,
    target: int = DEFAULT_FRAMES,
    subject_id: str = "",
    emotion: int = 0,
    au_set: AuAnnotation | None = None,
) -> tuple[list[int], MeSequence]:
    """Downsample a raw clip to ``target`` frames, retaining the key frames
    and remapping their positions into the selected sequence."""
    if raw_frames.ndim != 4:
        raise ContractError(f"keyframe_downsample: frames must be (N,H,W,C), got {raw_frames.shape}")
    indices = select_indices(raw_frames.shape[0], kf, target)
    arr = np.asarray(indices)
    new_kf = KeyFrames(
        onset=int(np.argmax(arr == kf.onset)),
        apex=int(np.argmax(arr == kf.apex)),
        offset=int(len(arr) - 1 - np.argmax(arr[::-1] == kf.offset)),
    )
    seq = MeSequence(
        frames=raw_frames[indices].astype(np.float64),
        subject_id=subject_id,
        emotion=emotion,
        au_set=au_set,
        keyframes=new_kf,
        raw_indices=tuple(indices),
    )
    return indices, seq
