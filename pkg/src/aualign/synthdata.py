"""Procedural micro-movement clips for end-to-end checks.

Each subject gets a fixed low-frequency base image (its identity); each
sample overlays Gaussian intensity bumps at canonical facial sites for
one AU set, scaled by a rise/fall envelope between the sampled onset,
apex, and offset frames. Bumps are truncated to the region-partition
cell that hosts the site, so motion support is exactly predictable. The
AU-set-to-emotion mapping is a configurable toy convention (FACS-style
pairings), not a modeling claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aucodes import AuAnnotation
from .augment import region_mask
from .errors import ContractError
from .sampling import KeyFrames

MODE_3CLASS = "3class"
MODE_7CLASS = "7class"

EMOTIONS_7 = ("anger", "contempt", "disgust", "fear", "happiness", "sadness", "surprise")
EMOTIONS_3 = ("negative", "positive", "surprise")
NEGATIVE_EMOTIONS = ("anger", "contempt", "disgust", "fear", "sadness")

DEFAULT_AU_EMOTION: dict[tuple[int, ...], str] = {
    (6, 12): "happiness",
    (1, 2, 5): "surprise",
    (4, 7): "anger",
    (9, 10): "disgust",
    (1, 4): "sadness",
    (20,): "fear",
    (12, 14): "contempt",
}

# Site centers as (region, row fraction, col fraction); every site sits
# strictly inside its region so truncated bumps never leak across cells.
AU_SITES: dict[int, tuple[tuple[str, float, float], ...]] = {
    1: (("forehead", 0.12, 0.40), ("forehead", 0.12, 0.60)),
    2: (("forehead", 0.10, 0.18), ("forehead", 0.10, 0.82)),
    4: (("forehead", 0.16, 0.50),),
    5: (("forehead", 0.20, 0.32), ("forehead", 0.20, 0.68)),
    6: (("left_cheek", 0.40, 0.22), ("right_cheek", 0.40, 0.78)),
    7: (("forehead", 0.22, 0.36), ("forehead", 0.22, 0.64)),
    9: (("left_cheek", 0.38, 0.44), ("right_cheek", 0.38, 0.56)),
    10: (("chin", 0.78, 0.40), ("chin", 0.78, 0.60)),
    12: (("chin", 0.80, 0.30), ("chin", 0.80, 0.70)),
    14: (("chin", 0.80, 0.24), ("chin", 0.80, 0.76)),
    15: (("chin", 0.84, 0.33), ("chin", 0.84, 0.67)),
    16: (("chin", 0.86, 0.50),),
    17: (("chin", 0.92, 0.50),),
    20: (("chin", 0.82, 0.20), ("chin", 0.82, 0.80)),
    23: (("chin", 0.82, 0.50),),
    24: (("chin", 0.83, 0.50),),
    25: (("chin", 0.81, 0.50),),
    28: (("chin", 0.85, 0.50),),
}


@dataclass(frozen=True)
class AuEmotionMap:
    entries: dict[tuple[int, ...], str] = field(default_factory=lambda: dict(DEFAULT_AU_EMOTION))

    def __post_init__(self):
        for au_set, emotion in self.entries.items():
            if emotion not in EMOTIONS_7:
                raise ContractError(f"AuEmotionMap: unknown emotion {emotion!r}")
            AuAnnotation(au_set)  # validates ids


def class_names(mode: str) -> tuple[str, ...]:
    if mode == MODE_3CLASS:
        return EMOTIONS_3
    if mode == MODE_7CLASS:
        return EMOTIONS_7
    raise ContractError(f"class_names: unknown emotion mode {mode!r}")


def au_to_emotion(au_set, amap: AuEmotionMap, mode: str) -> str:
    key = tuple(sorted(au_set))
    name = amap.entries.get(key)
    if name is None:
        raise ContractError(f"au_to_emotion: AU set {key} not in the emotion map")
    if mode == MODE_7CLASS:
        return name
    if mode == MODE_3CLASS:
        if name in NEGATIVE_EMOTIONS:
            return "negative"
        return "positive" if name == "happiness" else "surprise"
    raise ContractError(f"au_to_emotion: unknown emotion mode {mode!r}")


@dataclass(frozen=True)
class SynthConfig:
    num_subjects: int = 8
    samples_per_subject: int = 15
    height: int = 64
    width: int = 64
    raw_len_min: int = 24
    raw_len_max: int = 48
    noise_std: float = 0.005
    intensity_min: float = 0.4
    intensity_max: float = 0.7
    emotion_mode: str = MODE_3CLASS
    seed: int = 0
    class_weights: dict[str, float] | None = None

    def __post_init__(self):
        if self.height % 4 or self.width % 4:
            raise ContractError(
                f"SynthConfig: height and width must be divisible by 4, got {self.height}x{self.width}"
            )
        if self.num_subjects < 1 or self.samples_per_subject < 1:
            raise ContractError("SynthConfig: need at least one subject and one sample")
        if not 8 <= self.raw_len_min <= self.raw_len_max:
            raise ContractError(
                f"SynthConfig: bad raw length range [{self.raw_len_min}, {self.raw_len_max}]"
            )
        if self.noise_std < 0 or not 0 <= self.intensity_min <= self.intensity_max:
            raise ContractError("SynthConfig: negative noise or bad intensity range")
        class_names(self.emotion_mode)
        if self.class_weights is not None:
            names = class_names(self.emotion_mode)
            unknown = set(self.class_weights) - set(names)
            if unknown:
                raise ContractError(f"SynthConfig: weights for unknown classes {sorted(unknown)}")
            if any(w < 0 for w in self.class_weights.values()) or sum(self.class_weights.values()) <= 0:
                raise ContractError("SynthConfig: class weights must be nonnegative and sum > 0")


@dataclass(frozen=True)
class RawSample:
    frames: np.ndarray  # (N, H, W, 1) in [0, 1]
    subject_id: str
    emotion: int
    emotion_name: str
    au_set: AuAnnotation
    keyframes: KeyFrames


def _base_image(rng: np.random.Generator, height: int, width: int, grid: int = 6) -> np.ndarray:
    """Smooth per-subject appearance: bilinear upsample of a coarse field."""
    coarse = rng.uniform(0.0, 1.0, size=(grid, grid))
    xs = np.linspace(0.0, grid - 1.0, width)
    ys = np.linspace(0.0, grid - 1.0, height)
    rows = np.stack([np.interp(xs, np.arange(grid), coarse[r]) for r in range(grid)])
    img = np.stack([np.interp(ys, np.arange(grid), rows[:, c]) for c in range(width)], axis=1)
    return 0.25 + 0.5 * img


def motion_map(au_set: AuAnnotation, height: int, width: int) -> np.ndarray:
    """Unit-peak bump field for an AU set, truncated to the host regions."""
    yy, xx = np.mgrid[0:height, 0:width]
    sigma = 0.05 * height
    out = np.zeros((height, width))
    for code in au_set.codes:
        for region, fy, fx in AU_SITES[code]:
            cy, cx = fy * height, fx * width
            bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
            out += bump * region_mask(region, height, width).mask
    peak = out.max()
    return out / peak if peak > 0 else out


def envelope(t: int, kf: KeyFrames) -> float:
    """Piecewise-linear rise to 1 at the apex, fall to 0 at the offset."""
    if t <= kf.onset or t >= kf.offset:
        return 1.0 if t == kf.apex else 0.0
    if t <= kf.apex:
        return (t - kf.onset) / (kf.apex - kf.onset)
    return (kf.offset - t) / (kf.offset - kf.apex)


def au_regions(au_set: AuAnnotation) -> set[str]:
    return {region for code in au_set.codes for region, _, _ in AU_SITES[code]}


def _pick_au_set(rng: np.random.Generator, cfg: SynthConfig, amap: AuEmotionMap) -> tuple[int, ...]:
    names = class_names(cfg.emotion_mode)
    by_class: dict[str, list[tuple[int, ...]]] = {n: [] for n in names}
    for au_set in sorted(amap.entries):
        by_class[au_to_emotion(au_set, amap, cfg.emotion_mode)].append(au_set)
    usable = [n for n in names if by_class[n]]
    if cfg.class_weights is None:
        weights = np.ones(len(usable))
    else:
        weights = np.array([cfg.class_weights.get(n, 0.0) for n in usable])
        if weights.sum() <= 0:
            raise ContractError("SynthConfig: class weights exclude every mapped class")
    weights = weights / weights.sum()
    chosen = usable[int(rng.choice(len(usable), p=weights))]
    sets = by_class[chosen]
    return sets[int(rng.integers(0, len(sets)))]


def gen_dataset(cfg: SynthConfig, amap: AuEmotionMap | None = None) -> list[RawSample]:
    """Raw (pre-downsampling) samples, deterministic in the config seed."""
    amap = amap or AuEmotionMap()
    names = class_names(cfg.emotion_mode)
    samples: list[RawSample] = []
    for subj in range(cfg.num_subjects):
        subject_id = f"s{subj:02d}"
        base = _base_image(np.random.default_rng([cfg.seed, 101, subj]), cfg.height, cfg.width)
        for idx in range(cfg.samples_per_subject):
            rng = np.random.default_rng([cfg.seed, 202, subj, idx])
            au_ids = _pick_au_set(rng, cfg, amap)
            annotation = AuAnnotation(au_ids)
            emotion_name = au_to_emotion(au_ids, amap, cfg.emotion_mode)

            n = int(rng.integers(cfg.raw_len_min, cfg.raw_len_max + 1))
            margin = max(2, n // 6)
            onset = int(rng.integers(1, margin))
            offset = n - 1 - int(rng.integers(1, margin))
            apex = int(rng.integers(onset + 1, offset))
            kf = KeyFrames(onset=onset, apex=apex, offset=offset)

            intensity = float(rng.uniform(cfg.intensity_min, cfg.intensity_max))
            bumps = motion_map(annotation, cfg.height, cfg.width)
            frames = np.empty((n, cfg.height, cfg.width, 1))
            for t in range(n):
                frames[t, :, :, 0] = base + intensity * envelope(t, kf) * bumps
            if cfg.noise_std > 0:
                frames += rng.normal(0.0, cfg.noise_std, size=frames.shape)
            np.clip(frames, 0.0, 1.0, out=frames)

            samples.append(
                RawSample(
                    frames=frames,
                    subject_id=subject_id,
                    emotion=names.index(emotion_name),
                    emotion_name=emotion_name,
                    au_set=annotation,
                    keyframes=kf,
                )
            )
    return samples
