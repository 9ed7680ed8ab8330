import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poseaqa.posedata import (ROI_JOINTS, ActionUnitImage, CorpusError, DegenerateAngleError,
                              DiveParams, PoseFrame, PoseSequence, PoseValidationError, PoseWarning,
                              S_MAX, angles_from_joints, compose_action_unit, compose_action_units,
                              corpus_metadata, grid_shape, joint_angle, load_corpus, load_frames,
                              load_pose_sequence, pool_descriptor, save_frames, save_pose_sequence,
                              synth_corpus, synth_dive, write_corpus)
from poseaqa.posedata.synth import C_ANGLE, C_SPLASH, ideal_score


def _frame(rng, J=12, U=4):
    joints = rng.uniform(0.2, 0.8, size=(J, 2))
    return PoseFrame(joints, angles_from_joints(joints) if (J, U) == (12, 4) else np.full(U, 1.0),
                     [0.1, 0.1, 0.6, 0.8])


def _write_lines(path, frames):
    with open(path, "w") as fh:
        for f in frames:
            fh.write(json.dumps({"joints": np.asarray(f.joints).tolist(),
                                 "angles": np.asarray(f.angles).tolist(),
                                 "bbox": np.asarray(f.bbox).tolist()}) + "\n")


# ----------------------------------------------------------------------------
# pose files


def test_load_three_valid_frames(tmp_path):
    rng = np.random.default_rng(0)
    frames = [_frame(rng) for _ in range(3)]
    _write_lines(tmp_path / "p.jsonl", frames)
    seq = load_pose_sequence(tmp_path / "p.jsonl")
    assert len(seq) == 3
    np.testing.assert_array_equal(seq.joints[1], frames[1].joints)


def test_load_rejects_eleven_joints_naming_field_and_line(tmp_path):
    rng = np.random.default_rng(1)
    frames = [_frame(rng) for _ in range(3)]
    frames[1] = PoseFrame(frames[1].joints[:11], frames[1].angles, frames[1].bbox)
    _write_lines(tmp_path / "p.jsonl", frames)
    with pytest.raises(PoseValidationError, match=r"line 2: joints"):
        load_pose_sequence(tmp_path / "p.jsonl")


def test_load_reports_malformed_line_number(tmp_path):
    rng = np.random.default_rng(2)
    _write_lines(tmp_path / "p.jsonl", [_frame(rng)])
    with open(tmp_path / "p.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(PoseValidationError, match="line 2: malformed"):
        load_pose_sequence(tmp_path / "p.jsonl")


def test_load_rejects_empty_file_and_bad_bbox(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    with pytest.raises(PoseValidationError, match="no frames"):
        load_pose_sequence(tmp_path / "e.jsonl")
    f = _frame(np.random.default_rng(3))
    _write_lines(tmp_path / "b.jsonl", [PoseFrame(f.joints, f.angles, [0.1, 0.1, 0.0, 0.5])])
    with pytest.raises(PoseValidationError, match="bbox"):
        load_pose_sequence(tmp_path / "b.jsonl")


def test_angle_mismatch_warns_with_frame_index(tmp_path):
    rng = np.random.default_rng(4)
    frames = [_frame(rng) for _ in range(4)]
    derived = angles_from_joints(frames[2].joints)
    bad = derived.copy()
    bad[1] = np.clip(derived[1] + 0.2 if derived[1] < 2.9 else derived[1] - 0.2, 0, np.pi)
    frames[2] = PoseFrame(frames[2].joints, bad, frames[2].bbox)
    _write_lines(tmp_path / "p.jsonl", frames)
    with pytest.warns(PoseWarning, match=r"frames \[2\]"):
        seq = load_pose_sequence(tmp_path / "p.jsonl")
    np.testing.assert_array_equal(seq.angles[2], bad)


def test_consistent_angles_do_not_warn(tmp_path):
    rng = np.random.default_rng(5)
    _write_lines(tmp_path / "p.jsonl", [_frame(rng) for _ in range(4)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_pose_sequence(tmp_path / "p.jsonl")


def test_pose_vector_layout():
    rng = np.random.default_rng(6)
    frames = [_frame(rng) for _ in range(5)]
    seq = PoseSequence.from_frames(frames)
    vec = seq.pose_vectors()
    assert vec.shape == (5, 29)
    np.testing.assert_array_equal(vec[3, :24], frames[3].joints.reshape(-1))
    np.testing.assert_array_equal(vec[3, 24:28], frames[3].angles)
    assert abs(vec[3, 28] - frames[3].bbox[3] / frames[3].bbox[2]) < 1e-9


# ----------------------------------------------------------------------------
# joint angles


def test_joint_angle_right_and_straight():
    assert joint_angle((0, 1), (0, 0), (1, 0)) == pytest.approx(math.pi / 2, abs=1e-15)
    assert joint_angle((0, 0), (1, 0), (2, 0)) == pytest.approx(math.pi, abs=1e-15)


def test_joint_angle_analytic_construction():
    th = 0.7
    assert abs(joint_angle((0, 0), (1, 0), (1 + math.cos(th), math.sin(th))) - (math.pi - th)) < 1e-9


def test_joint_angle_degenerate():
    with pytest.raises(DegenerateAngleError):
        joint_angle((1, 1), (1, 1), (0, 0))


coords = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(coords, min_size=6, max_size=6), st.floats(0, 2 * math.pi), coords, coords,
       st.floats(0.1, 10))
def test_joint_angle_similarity_invariance(pts, rot, tx, ty, scale):
    a, b, c = np.array(pts).reshape(3, 2)
    if min(np.hypot(*(a - b)), np.hypot(*(c - b))) < 1e-3:
        return
    R = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    move = lambda p: scale * (R @ p) + np.array([tx, ty])
    base = joint_angle(a, b, c)
    assert 0 <= base <= math.pi
    assert abs(joint_angle(move(a), move(b), move(c)) - base) < 1e-9


# ----------------------------------------------------------------------------
# action units


def _centre_frame():
    joints = np.full((12, 2), 0.5)
    return PoseFrame(joints, np.zeros(4), [0.3, 0.3, 0.4, 0.4])


def test_action_unit_layout_y8_p16():
    assert grid_shape(8) == (3, 3)
    au = compose_action_unit(np.full((64, 64), 0.5), _centre_frame(), ROI_JOINTS, 16)
    assert au.pixels.shape == (48, 48)
    assert au.grid == (3, 3)
    np.testing.assert_array_equal(au.patch(8), np.zeros((16, 16)))


def test_action_unit_constant_image_gives_uniform_patch():
    au = compose_action_unit(np.full((64, 64), 0.5), _centre_frame(), ROI_JOINTS, 16)
    for i in range(8):
        np.testing.assert_allclose(au.patch(i), 0.5, rtol=0, atol=1e-15)


def test_action_unit_corner_joint_is_three_quarters_padding():
    joints = np.full((12, 2), 0.5)
    joints[ROI_JOINTS[0]] = (0.0, 0.0)
    frame = PoseFrame(joints, np.zeros(4), [0.0, 0.0, 0.8, 0.8])
    au = compose_action_unit(np.ones((64, 64)), frame, ROI_JOINTS, 16)
    patch = au.patch(0)
    # the window is centred on the corner: only the lower-right quadrant lies inside the image
    assert np.count_nonzero(patch == 0) == 3 * 64
    np.testing.assert_array_equal(patch[8:, 8:], np.ones((8, 8)))


def test_action_unit_degenerate_bbox_warns_and_is_empty():
    joints = np.full((12, 2), 0.5)
    frame = PoseFrame(joints, np.zeros(4), [0.5, 0.5, 0.0, 0.0])
    with pytest.warns(PoseWarning):
        au = compose_action_unit(np.ones((64, 64)), frame)
    assert not au.pixels.any()


def test_batched_action_units_equal_per_frame_calls():
    sample = synth_dive(DiveParams(seed=3))
    batched = compose_action_units(sample.frames, sample.pose)
    for t in (0, 10, len(sample.pose) - 1):
        single = compose_action_unit(sample.frames[t], sample.pose[t])
        np.testing.assert_array_equal(batched[t], single.pixels)
    assert batched.min() >= 0 and batched.max() <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(2, 12), st.integers(0, 10_000))
def test_action_unit_shape_depends_only_on_y_and_p(Y, P, seed):
    rng = np.random.default_rng(seed)
    joints = rng.uniform(-0.2, 1.2, size=(12, 2))
    frame = PoseFrame(joints, np.zeros(4), [0.1, 0.1, rng.uniform(0.05, 1), rng.uniform(0.05, 1)])
    au = compose_action_unit(rng.uniform(0, 1, size=(32, 40)), frame, list(range(Y)), P)
    rows, cols = grid_shape(Y)
    assert au.pixels.shape == (rows * P, cols * P)
    assert au.pixels.min() >= 0 and au.pixels.max() <= 1


def test_pool_descriptor_matches_block_mean_oracle():
    img = np.random.default_rng(7).uniform(size=(48, 48))
    d = pool_descriptor(img, 8)
    for r in range(8):
        for c in range(8):
            assert abs(d[r * 8 + c] - img[6 * r:6 * r + 6, 6 * c:6 * c + 6].mean()) < 1e-15
    uneven = np.random.default_rng(8).uniform(size=(10, 13))
    assert pool_descriptor(uneven, 4).shape == (16,)


# ----------------------------------------------------------------------------
# synthetic dives


def test_synth_is_bitwise_deterministic():
    a, b = synth_dive(DiveParams(seed=11, splash=0.4)), synth_dive(DiveParams(seed=11, splash=0.4))
    np.testing.assert_array_equal(a.frames, b.frames)
    np.testing.assert_array_equal(a.pose.joints, b.pose.joints)
    assert a.score == b.score and a.gt_keyframes == b.gt_keyframes


def test_perfect_dive_scores_s_max():
    s = synth_dive(DiveParams(seed=1))
    assert s.score == S_MAX


def test_doubling_deviation_lowers_score():
    dev = np.random.default_rng(9).uniform(0.05, 0.3, size=(3, 4))
    one = synth_dive(DiveParams(seed=5, angle_deviation=dev, splash=0.2))
    two = synth_dive(DiveParams(seed=5, angle_deviation=2 * dev, splash=0.2))
    for s in (one, two):
        expected = S_MAX - C_ANGLE * s.motion_deviation - C_SPLASH * 0.2
        assert s.score == pytest.approx(expected, abs=1e-12)
    assert two.motion_deviation > one.motion_deviation
    assert two.score < one.score
    assert ideal_score(2 * one.motion_deviation, 0.2) < one.score


def test_synth_rejects_short_phases():
    with pytest.raises(ValueError, match="entry_frames"):
        DiveParams(entry_frames=3)
    with pytest.raises(ValueError, match="splash"):
        DiveParams(splash=-0.1)


def test_synth_corpus_properties():
    videos = synth_corpus(20, 5, seed=4)
    assert [v.item.split for v in videos].count("test") == 5
    for v in videos:
        K, T = v.item.gt_keyframes, len(v.pose)
        assert all(1 <= k <= T - 1 for k in K) and list(K) == sorted(set(K))
        assert v.frames.shape[0] == T
        assert 0 <= v.item.score <= S_MAX
        assert v.pose.joints.min() >= 0 and v.pose.joints.max() <= 1
        assert v.item.difficulty > 0
    # item k depends only on the seed and k
    again = synth_corpus(3, 0, seed=4)
    np.testing.assert_array_equal(again[2].frames, videos[2].frames)


# ----------------------------------------------------------------------------
# corpus files


def test_frames_binary_layout(tmp_path):
    frames = np.random.default_rng(10).uniform(size=(2, 3, 4)).astype(np.float32)
    save_frames(frames, tmp_path / "f.auf")
    blob = (tmp_path / "f.auf").read_bytes()
    assert blob[:4] == b"AUF1"
    assert blob[4:16] == np.array([2, 3, 4], dtype="<u4").tobytes()
    assert len(blob) == 16 + 4 * 24
    np.testing.assert_array_equal(load_frames(tmp_path / "f.auf"), frames)
    (tmp_path / "t.auf").write_bytes(blob[:-4])
    with pytest.raises(CorpusError, match="expected"):
        load_frames(tmp_path / "t.auf")


def test_corpus_of_three_round_trips(tmp_path):
    videos = synth_corpus(3, 0, seed=2)
    manifest = write_corpus(videos, tmp_path, S_MAX, extra=corpus_metadata(0.0, 64))
    assert len(manifest["items"]) == 3
    corpus = load_corpus(tmp_path)
    assert [it.id for it in corpus.items] == [v.item.id for v in videos]
    assert corpus.manifest["c_a"] == C_ANGLE and corpus.score_range == (0.0, S_MAX)


def test_empty_and_duplicate_corpora_rejected(tmp_path):
    with pytest.raises(CorpusError, match="empty"):
        write_corpus([], tmp_path, S_MAX)
    v = synth_corpus(1, 0, seed=0)
    with pytest.raises(CorpusError, match="duplicate"):
        write_corpus(v + v, tmp_path, S_MAX)


def test_load_corpus_validates_scores(tmp_path):
    write_corpus(synth_corpus(2, 0, seed=0), tmp_path, S_MAX)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["items"][1]["score"] = 120.0
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CorpusError, match=r"items\[1\].*outside"):
        load_corpus(tmp_path)


def test_three_hundred_item_round_trip_is_exact(tmp_path):
    videos = synth_corpus(250, 50, seed=8, judge_noise=2.0)
    write_corpus(videos, tmp_path, S_MAX)
    corpus = load_corpus(tmp_path)
    assert len(corpus.items) == 300
    for v, item in zip(videos, corpus.items):
        assert item.to_json() == v.item.to_json()
        back = corpus.load_video(item)
        np.testing.assert_array_equal(back.pose.joints, v.pose.joints)
        np.testing.assert_array_equal(back.pose.angles, v.pose.angles)
        np.testing.assert_array_equal(back.pose.bbox, v.pose.bbox)
        assert back.frames.tobytes() == v.frames.tobytes()


def test_action_unit_image_type_grid():
    img = ActionUnitImage(np.zeros((32, 48)), 5, 16)
    assert img.grid == (2, 3)
