"""Shared tiny-scale fixtures for training and CLI tests."""

import numpy as np
import pytest

from aualign.config import RunConfig
from aualign.encoder import EncoderConfig
from aualign.sampling import keyframe_downsample
from aualign.synthdata import SynthConfig, class_names, gen_dataset

TINY_ENCODER = EncoderConfig(
    height=32,
    width=32,
    frames=8,
    patch=16,
    temporal_stride=2,
    d1=16,
    local_blocks=1,
    global_blocks=1,
    heads=2,
    d2=16,
    head_hidden=16,
    head_blocks=1,
    num_classes=3,
)

TINY_SYNTH = SynthConfig(
    num_subjects=3,
    samples_per_subject=4,
    height=32,
    width=32,
    raw_len_min=10,
    raw_len_max=14,
    seed=2,
)


def tiny_run_config(**overrides) -> RunConfig:
    base = dict(
        synth=TINY_SYNTH,
        frames=8,
        encoder=TINY_ENCODER,
        d_text=16,
        batch_size=4,
        epochs=3,
        base_lr=1e-3,
        warmup_epochs=1,
        seed=7,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def tiny_sequences():
    raws = gen_dataset(TINY_SYNTH)
    return [
        keyframe_downsample(
            r.frames, r.keyframes, 8, subject_id=r.subject_id, emotion=r.emotion, au_set=r.au_set
        )[1]
        for r in raws
    ]


@pytest.fixture(scope="session")
def tiny_names():
    return class_names(TINY_SYNTH.emotion_mode)
