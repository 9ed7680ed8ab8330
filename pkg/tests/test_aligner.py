import numpy as np
import pytest

from poseaqa.aligner import (AlignmentError, align_pair, align_video, resample, split_motion_condition,
                             subdivide)
from poseaqa.pipeline import prepare_video
from poseaqa.posedata import synth_corpus
from poseaqa.segmenter import KeyframeSet


def _video(rng, T, P=5, D=4):
    return rng.normal(size=(T, P)), rng.uniform(size=(T, D))


def _random_k(rng, T, H=3):
    return KeyframeSet(tuple(sorted(rng.choice(np.arange(1, T), H, replace=False))), T)


def test_split_rule():
    assert split_motion_condition(100, KeyframeSet((30, 60, 80), 100)) == ((0, 80), (80, 100))


def test_single_frame_condition_accepted():
    motion, condition = split_motion_condition(50, KeyframeSet((10, 20, 49), 50))
    assert condition == (49, 50)
    aligned = align_video(*_video(np.random.default_rng(0), 50), KeyframeSet((10, 20, 49), 50), 16, 24)
    assert aligned.condition_au.shape == (24, 4)


def test_split_rejects_mismatched_length():
    with pytest.raises(AlignmentError):
        split_motion_condition(90, KeyframeSet((30, 60, 80), 100))


@pytest.mark.parametrize("seed", range(100))
def test_motion_and_condition_tile_the_video(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(4, 200))
    K = _random_k(rng, T)
    (m0, m1), (c0, c1) = split_motion_condition(T, K)
    frames = set(range(m0, m1)) | set(range(c0, c1))
    assert frames == set(range(T)) and m1 == c0 and m0 == 0 and c1 == T


def test_subdivide_three_phases():
    phases = subdivide((0, 80), (30, 60))
    assert [(p.index, p.start, p.end) for p in phases] == [(1, 0, 30), (2, 30, 60), (3, 60, 80)]


def test_subdivide_without_transitions_is_one_phase():
    phases = subdivide((0, 80), ())
    assert len(phases) == 1 and (phases[0].start, phases[0].end) == (0, 80)


def test_subdivide_names_short_phase():
    with pytest.raises(AlignmentError, match="sub-phase 2"):
        subdivide((0, 80), (30, 31))


def test_gt_keyframes_recover_generator_phases():
    for v in synth_corpus(5, 0, seed=3):
        data = prepare_video(v)
        aligned = align_video(data.pose, data.descriptors, data.gt_keyframes)
        k1, k2, k3 = v.item.gt_keyframes
        assert [(p.start, p.end) for p in aligned.phases] == [(0, k1), (k1, k2), (k2, k3)]
        assert aligned.condition == (k3, len(v.pose))


# ----------------------------------------------------------------------------
# resampling


def test_resample_identity_at_target_length():
    x = np.random.default_rng(1).normal(size=(16, 3))
    np.testing.assert_array_equal(resample(x, 16), x)
    np.testing.assert_array_equal(resample(x, 16, "nearest"), x)


def test_resample_keeps_linear_ramp():
    ramp = np.linspace(0, 1, 10)
    np.testing.assert_allclose(resample(ramp, 16), np.linspace(0, 1, 16), rtol=0, atol=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_resample_matches_scalar_interpolation_oracle(seed):
    x = np.random.default_rng(seed).normal(size=(7, 3))
    out = resample(x, 16)
    np.testing.assert_array_equal(out[0], x[0])
    np.testing.assert_array_equal(out[-1], x[-1])
    for j in range(16):
        t = j * 6 / 15
        lo = min(int(t), 5)
        w = t - lo
        for c in range(3):
            assert abs(out[j, c] - ((1 - w) * x[lo, c] + w * x[lo + 1, c])) < 1e-12


def test_resample_idempotent_at_target_length():
    x = np.random.default_rng(2).normal(size=(11, 4))
    once = resample(x, 16)
    np.testing.assert_array_equal(resample(once, 16), once)


def test_nearest_resampling_takes_whole_frames():
    frames = np.arange(5)[:, None, None] * np.ones((5, 2, 2))
    out = resample(frames, 9, "nearest")
    assert set(np.unique(out)) <= set(range(5))
    # sample times 0, 0.5, ..., 4; halves round up to the later frame
    np.testing.assert_array_equal(out[:, 0, 0], [0, 1, 1, 2, 2, 3, 3, 4, 4])


# ----------------------------------------------------------------------------
# pairs


def test_self_alignment_is_identical():
    rng = np.random.default_rng(3)
    v = _video(rng, 60)
    K = KeyframeSet((15, 30, 45), 60)
    for pair in align_pair(v, v, K, K):
        np.testing.assert_array_equal(pair.query_au, pair.reference_au)
        if pair.query_pose is not None:
            np.testing.assert_array_equal(pair.query_pose, pair.reference_pose)


def test_different_lengths_align_to_common_shapes():
    rng = np.random.default_rng(4)
    q, e = _video(rng, 90), _video(rng, 110)
    pairs = align_pair(q, e, KeyframeSet((20, 50, 70), 90), KeyframeSet((25, 60, 85), 110), 16, 24)
    assert len(pairs) == 4
    for p in pairs[:3]:
        assert p.query_pose.shape == p.reference_pose.shape == (16, 5)
        assert p.query_au.shape == p.reference_au.shape == (16, 4)
    assert pairs[3].query_au.shape == pairs[3].reference_au.shape == (24, 4)


def test_swapping_roles_swaps_pairs():
    rng = np.random.default_rng(5)
    q, e = _video(rng, 70), _video(rng, 80)
    Kq, Ke = KeyframeSet((20, 40, 60), 70), KeyframeSet((15, 45, 65), 80)
    fwd, bwd = align_pair(q, e, Kq, Ke), align_pair(e, q, Ke, Kq)
    for a, b in zip(fwd, bwd):
        np.testing.assert_array_equal(a.query_au, b.reference_au)
        np.testing.assert_array_equal(a.reference_au, b.query_au)
        if a.query_pose is not None:
            np.testing.assert_array_equal(a.query_pose, b.reference_pose)


def test_mismatched_phase_counts_rejected():
    rng = np.random.default_rng(6)
    q, e = _video(rng, 70), _video(rng, 80)
    with pytest.raises(AlignmentError, match="transitions"):
        align_pair(q, e, KeyframeSet((20, 40, 60), 70), KeyframeSet((40, 65), 80))
