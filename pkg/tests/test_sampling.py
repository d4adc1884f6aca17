"""Keyframe-preserving downsampling: retention, length, proportionality."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aualign.errors import ContractError
from aualign.sampling import KeyFrames, MeSequence, keyframe_downsample, select_indices


def test_identity_when_length_matches():
    for apex in (1, 5, 8, 14):
        idx = select_indices(16, KeyFrames(0, apex, 15), 16)
        assert idx == list(range(16))


def test_long_clip_selection():
    idx = select_indices(40, KeyFrames(0, 10, 39), 16)
    assert len(idx) == 16
    assert {0, 10, 39} <= set(idx)
    assert all(a < b for a, b in zip(idx, idx[1:]))


def test_short_clip_repeats():
    idx = select_indices(3, KeyFrames(0, 1, 2), 16)
    assert len(idx) == 16
    assert {0, 1, 2} <= set(idx)
    assert all(a <= b for a, b in zip(idx, idx[1:]))
    assert set(idx) <= {0, 1, 2}


def test_apex_equals_onset_puts_interior_in_fall():
    idx = select_indices(40, KeyFrames(5, 5, 35), 10)
    interior = [i for i in idx if i not in (5, 35)]
    assert all(5 < i < 35 for i in interior if i != 5)
    # symmetric case
    idx2 = select_indices(40, KeyFrames(5, 35, 35), 10)
    interior2 = [i for i in idx2 if i not in (5, 35)]
    assert all(5 < i < 35 for i in interior2 if i != 35)


def test_keyframe_order_violation():
    with pytest.raises(ContractError):
        select_indices(10, KeyFrames(5, 3, 8), 6)
    with pytest.raises(ContractError):
        select_indices(10, KeyFrames(0, 2, 10), 6)


def test_target_too_small():
    with pytest.raises(ContractError):
        select_indices(10, KeyFrames(0, 4, 9), 2)


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_retention_property(data):
    raw_len = data.draw(st.integers(min_value=1, max_value=80))
    onset = data.draw(st.integers(min_value=0, max_value=raw_len - 1))
    apex = data.draw(st.integers(min_value=onset, max_value=raw_len - 1))
    offset = data.draw(st.integers(min_value=apex, max_value=raw_len - 1))
    target = data.draw(st.integers(min_value=3, max_value=24))
    idx = select_indices(raw_len, KeyFrames(onset, apex, offset), target)
    assert len(idx) == target
    assert all(0 <= i < raw_len for i in idx)
    assert all(a <= b for a, b in zip(idx, idx[1:]))
    assert {onset, apex, offset} <= set(idx)


def test_downsample_remaps_keyframes():
    rng = np.random.default_rng(0)
    frames = rng.random((40, 8, 8, 1))
    indices, seq = keyframe_downsample(frames, KeyFrames(2, 11, 37), target=16, subject_id="s1", emotion=2)
    assert isinstance(seq, MeSequence)
    assert seq.frames.shape == (16, 8, 8, 1)
    kf = seq.keyframes
    assert indices[kf.onset] == 2 and indices[kf.apex] == 11 and indices[kf.offset] == 37
    assert 0 <= kf.onset <= kf.apex <= kf.offset < 16
    np.testing.assert_array_equal(seq.frames, frames[indices])
    assert seq.subject_id == "s1" and seq.emotion == 2


def test_downsample_selected_frames_match_source():
    rng = np.random.default_rng(1)
    frames = rng.random((24, 4, 4, 1))
    indices, seq = keyframe_downsample(frames, KeyFrames(0, 12, 23), target=8)
    for out_pos, src in enumerate(indices):
        np.testing.assert_array_equal(seq.frames[out_pos], frames[src])
